//! Primal log-barrier solver for smooth convex programs of the form
//!
//! ```txt
//! maximize x[objective]  subject to  g_i(x) <= 0
//! ```
//!
//! where every `g_i` is an [`Expr`] with non-negative curvature atoms.
//! Centering uses damped Newton steps with exact Hessians assembled from the
//! rank-one atom structure. The barrier weight starts at `mu0` and shrinks by
//! `mu_factor` per outer step until the duality-gap bound `m * mu` drops
//! below `opt`.

use std::fmt;

use crate::error::{Error, Result};
use crate::expr::{Expr, LocalDerivatives, Named};
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    /// `expr <= 0`.
    pub expr: Expr<T>,
    pub tag: String,
    support: Vec<usize>,
}

impl<T: Scalar> Constraint<T> {
    pub fn new(expr: Expr<T>, tag: impl Into<String>) -> Self {
        let support = expr.support();
        Self { expr, tag: tag.into(), support }
    }
}

/// Maximize one variable subject to convex inequality constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProgram<T> {
    pub names: Vec<String>,
    pub objective: usize,
    pub constraints: Vec<Constraint<T>>,
}

impl<T: Scalar> ConvexProgram<T> {
    pub fn new(names: Vec<String>, objective: usize) -> Self {
        Self { names, objective, constraints: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn push(&mut self, expr: Expr<T>, tag: impl Into<String>) {
        self.constraints.push(Constraint::new(expr, tag));
    }

    /// Largest constraint value at `x` (`+inf` outside some domain).
    pub fn max_violation(&self, x: &[T]) -> T {
        self.constraints
            .iter()
            .map(|c| c.expr.eval(x).unwrap_or(T::infinity()))
            .fold(T::neg_infinity(), T::max)
    }

    /// First constraint (by index) that is not strictly satisfied.
    pub fn first_non_strict(&self, x: &[T]) -> Option<(usize, T)> {
        self.constraints.iter().enumerate().find_map(|(i, c)| match c.expr.eval(x) {
            Some(v) if v < T::zero() => None,
            Some(v) => Some((i, v)),
            None => Some((i, T::infinity())),
        })
    }

    /// One line per constraint, variables by name.
    pub fn dump(&self) -> String {
        let names = |i: usize| self.names[i].clone();
        let mut out = format!("maximize {}\n", self.names[self.objective]);
        for c in &self.constraints {
            out.push_str(&format!("[{}] {} <= 0\n", c.tag, Named { expr: &c.expr, names: &names }));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Feasibility tolerance for reporting.
    pub feas: f64,
    /// Target bound on the duality gap and stationarity residual.
    pub opt: f64,
    pub mu0: f64,
    pub mu_factor: f64,
    pub max_outer: usize,
    pub max_newton: usize,
    /// Centering stops once half the squared Newton decrement is below this.
    pub newton_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { feas: 1e-8, opt: 1e-7, mu0: 1.0, mu_factor: 10.0, max_outer: 60, max_newton: 80, newton_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Optimal => write!(f, "optimal"),
            Self::MaxIter => write!(f, "max-iter"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceLine {
    pub outer: usize,
    pub mu: f64,
    pub newton_iters: usize,
    pub decrement: f64,
    pub objective: f64,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "outer={} mu={:.3e} newton={} decrement={:.3e} objective={:.12e}",
            self.outer, self.mu, self.newton_iters, self.decrement, self.objective
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// Barrier-scaled stationarity residual `mu * lambda` plus the gap bound `m * mu`.
    pub kkt_residual: T,
    pub max_violation: T,
    pub status: SolveStatus,
    pub newton_iters: usize,
    pub trace: Vec<TraceLine>,
}

struct Workspace<T> {
    n: usize,
    grad: Vec<T>,
    hess: Vec<T>,
    step: Vec<T>,
    local: LocalDerivatives<T>,
}

impl<T: Scalar> Workspace<T> {
    fn new(n: usize) -> Self {
        Self {
            n,
            grad: vec![T::zero(); n],
            hess: vec![T::zero(); n * n],
            step: vec![T::zero(); n],
            local: LocalDerivatives::new(n),
        }
    }
}

/// `-s * x[obj] - sum ln(-g_i(x))`; `None` when not strictly feasible.
fn barrier_value<T: Scalar>(p: &ConvexProgram<T>, x: &[T], s: T) -> Option<T> {
    let mut v = -s * x[p.objective];
    for c in &p.constraints {
        let g = c.expr.eval(x)?;
        if !(g < T::zero()) {
            return None;
        }
        v = v - (-g).ln();
    }
    Some(v)
}

fn assemble<T: Scalar>(p: &ConvexProgram<T>, x: &[T], s: T, ws: &mut Workspace<T>) -> Option<()> {
    let n = ws.n;
    ws.grad.iter_mut().for_each(|g| *g = T::zero());
    ws.hess.iter_mut().for_each(|h| *h = T::zero());
    ws.grad[p.objective] = -s;
    for c in &p.constraints {
        let g = c.expr.derivatives(x, &c.support, &mut ws.local)?;
        if !(g < T::zero()) {
            return None;
        }
        let inv = T::one() / (-g);
        let sup = &c.support;
        for (a, &i) in sup.iter().enumerate() {
            let gi = ws.local.grad[a];
            ws.grad[i] = ws.grad[i] + gi * inv;
            let row = i * n;
            for (b, &j) in sup.iter().enumerate() {
                ws.hess[row + j] = ws.hess[row + j] + gi * ws.local.grad[b] * inv * inv;
            }
        }
        for (kappa, v) in &ws.local.curvature {
            let w = *kappa * inv;
            for (a, &i) in sup.iter().enumerate() {
                if v[a] == T::zero() {
                    continue;
                }
                let row = i * n;
                for (b, &j) in sup.iter().enumerate() {
                    ws.hess[row + j] = ws.hess[row + j] + w * v[a] * v[b];
                }
            }
        }
    }
    Some(())
}

/// In-place Cholesky of a symmetric positive definite matrix (lower triangle).
fn cholesky<T: Scalar>(a: &mut [T], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d = d - a[j * n + k] * a[j * n + k];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

fn cholesky_solve<T: Scalar>(l: &[T], n: usize, b: &mut [T]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s = s - l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Newton direction `-H^{-1} grad` into `ws.step`, with diagonal
/// regularization when `H` is numerically singular. Returns the squared
/// Newton decrement.
fn newton_direction<T: Scalar>(ws: &mut Workspace<T>, scratch: &mut [T]) -> Option<T> {
    let n = ws.n;
    let diag_scale = (0..n).map(|i| ws.hess[i * n + i].abs()).fold(T::zero(), T::max).max(T::one());
    let mut reg = T::zero();
    for _ in 0..12 {
        scratch.copy_from_slice(&ws.hess);
        if reg > T::zero() {
            for i in 0..n {
                scratch[i * n + i] = scratch[i * n + i] + reg;
            }
        }
        if cholesky(scratch, n) {
            for i in 0..n {
                ws.step[i] = -ws.grad[i];
            }
            cholesky_solve(scratch, n, &mut ws.step);
            let dec = ws.grad.iter().zip(&ws.step).fold(T::zero(), |acc, (&g, &d)| acc - g * d);
            if dec.is_finite() {
                return Some(dec.max(T::zero()));
            }
        }
        reg = if reg == T::zero() { diag_scale * T::epsilon() * T::lit(16.0) } else { reg * T::lit(100.0) };
    }
    None
}

/// Maximizes `x[p.objective]` from a strictly feasible `start`.
///
/// Returns the better (by objective) of the final barrier iterate and the
/// start point, so the objective never decreases.
pub fn solve<T: Scalar>(p: &ConvexProgram<T>, start: &[T], tol: &Tolerances) -> Result<Solution<T>> {
    let n = p.len();
    if start.len() != n {
        return Err(Error::Domain(format!("start has {} entries, program has {n} variables", start.len())));
    }
    if let Some((i, v)) = p.first_non_strict(start) {
        return Err(Error::NotStrictlyFeasible(format!("constraint [{}] = {v}", p.constraints[i].tag)));
    }
    let m = T::from_usize_lossy(p.constraints.len());
    let mut ws = Workspace::new(n);
    let mut scratch = vec![T::zero(); n * n];
    let mut trial = vec![T::zero(); n];
    let mut x = start.to_vec();
    let mut mu = T::lit(tol.mu0);
    let opt = T::lit(tol.opt);
    let newton_tol = T::lit(tol.newton_tol);
    let mut status = SolveStatus::MaxIter;
    let mut total_newton = 0;
    let mut last_decrement = T::infinity();
    let mut trace = Vec::new();
    let alpha = T::lit(0.25);
    let beta = T::lit(0.5);

    'outer: for outer in 0..tol.max_outer {
        let s = T::one() / mu;
        let mut iters = 0;
        let mut centered = false;
        while iters < tol.max_newton {
            if assemble(p, &x, s, &mut ws).is_none() {
                break 'outer;
            }
            let Some(dec) = newton_direction(&mut ws, &mut scratch) else {
                break 'outer;
            };
            iters += 1;
            last_decrement = dec;
            if dec / T::lit(2.0) <= newton_tol {
                centered = true;
                break;
            }
            let f0 = barrier_value(p, &x, s).expect("current iterate is strictly feasible");
            let slope = -dec;
            let mut step = T::one();
            let mut accepted = false;
            for _ in 0..60 {
                for i in 0..n {
                    trial[i] = x[i] + step * ws.step[i];
                }
                if let Some(f1) = barrier_value(p, &trial, s) {
                    if f1 <= f0 + alpha * step * slope {
                        accepted = true;
                        break;
                    }
                }
                step = step * beta;
            }
            if !accepted {
                // No representable decrease left: the iterate is centered to
                // working precision.
                centered = true;
                break;
            }
            x.copy_from_slice(&trial);
        }
        total_newton += iters;
        trace.push(TraceLine {
            outer,
            mu: mu.as_f64(),
            newton_iters: iters,
            decrement: last_decrement.as_f64(),
            objective: x[p.objective].as_f64(),
        });
        if !centered {
            break;
        }
        if m * mu <= opt {
            status = SolveStatus::Optimal;
            break;
        }
        mu = mu / T::lit(tol.mu_factor);
    }

    let kkt_residual = mu * last_decrement.sqrt() + m * mu;
    if status == SolveStatus::Optimal && kkt_residual > T::lit(2.0) * opt {
        status = SolveStatus::MaxIter;
    }
    if x[p.objective] < start[p.objective] {
        x.copy_from_slice(start);
    }
    Ok(Solution {
        objective: x[p.objective],
        max_violation: p.max_violation(&x),
        x,
        kkt_residual,
        status,
        newton_iters: total_newton,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Affine;
    use crate::surrogate::bilinear_upper_bound;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn single_affine_bound() {
        let mut p = ConvexProgram::<f64>::new(names(1), 0);
        p.push(Affine::constant(-5.0).with_term(0, 1.0).into(), "z<=5");
        let sol = solve(&p, &[0.0], &Tolerances::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 5.0).abs() < 1e-6, "{}", sol.objective);
        assert!(sol.max_violation <= 0.0);
    }

    #[test]
    fn rejects_infeasible_start() {
        let mut p = ConvexProgram::<f64>::new(names(1), 0);
        p.push(Affine::constant(-5.0).with_term(0, 1.0).into(), "z<=5");
        assert!(matches!(solve(&p, &[5.0], &Tolerances::default()), Err(Error::NotStrictlyFeasible(_))));
        assert!(solve(&p, &[0.0, 1.0], &Tolerances::default()).is_err());
    }

    #[test]
    fn disk_constraint() {
        // maximize x0 s.t. x0^2 + x1^2 <= 4
        let mut p = ConvexProgram::<f64>::new(names(2), 0);
        let e = Expr { affine: Affine::constant(-4.0), atoms: vec![] }
            .plus(&Expr { affine: Affine::constant(0.0), atoms: vec![crate::expr::Atom::Square { coeff: 1.0, arg: Affine::var(0) }] })
            .plus(&Expr { affine: Affine::constant(0.0), atoms: vec![crate::expr::Atom::Square { coeff: 1.0, arg: Affine::var(1) }] });
        p.push(e, "disk");
        let sol = solve(&p, &[0.5, 0.5], &Tolerances::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 2.0).abs() < 1e-6);
        assert!(sol.x[1].abs() < 1e-3);
    }

    /// maximize z s.t. bilinear(z, tq; 1, 1) <= 4, 1 <= tq <= 2, z >= 0.
    fn bilinear_program() -> ConvexProgram<f64> {
        let mut p = ConvexProgram::<f64>::new(vec!["z".into(), "tq".into()], 0);
        let b = bilinear_upper_bound(&Affine::var(0), &Affine::var(1), 1.0, 1.0);
        p.push(b.plus_affine(&Affine::constant(-4.0)), "z*tq<=t");
        p.push(Affine::constant(1.0).with_term(1, -1.0).into(), "tq>=1");
        p.push(Affine::constant(-2.0).with_term(1, 1.0).into(), "tq<=2");
        p.push(Affine::constant(0.0).with_term(0, -1.0).into(), "z>=0");
        p
    }

    /// Bisection on z: feasible iff min over tq in [1, 2] of (z + tq)^2 / 4 <= 4.
    fn bilinear_reference() -> f64 {
        let feasible = |z: f64| {
            (0..=1000).map(|i| 1.0 + i as f64 / 1000.0).any(|tq| 0.25 * (z + tq) * (z + tq) <= 4.0)
        };
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn bilinear_surrogate_matches_bisection() {
        let reference = bilinear_reference();
        assert!((reference - 3.0).abs() < 1e-12);
        let sol = solve(&bilinear_program(), &[0.5, 1.5], &Tolerances::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - reference).abs() < 1e-6, "{}", sol.objective);
    }

    #[test]
    fn deterministic_and_ascending() {
        let p = bilinear_program();
        let a = solve(&p, &[0.5, 1.5], &Tolerances::default()).unwrap();
        let b = solve(&p, &[0.5, 1.5], &Tolerances::default()).unwrap();
        assert_eq!(a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert!(a.objective >= 0.5);
        assert!(!a.trace.is_empty());
        assert!(p.dump().contains("[z*tq<=t]"));
    }

    #[test]
    fn cholesky_solves_spd() {
        let mut a = vec![4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let orig = a.clone();
        assert!(cholesky(&mut a, 3));
        let mut b = vec![1.0, 2.0, 3.0];
        cholesky_solve(&a, 3, &mut b);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| orig[i * 3 + j] * b[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
        let mut bad = vec![1.0, 2.0, 2.0, 1.0];
        assert!(!cholesky(&mut bad, 2));
    }
}
