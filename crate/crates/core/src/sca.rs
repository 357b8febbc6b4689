//! Successive convex approximation for the max-min effective-rate problem.
//!
//! The ratio objective is put in epigraph form with auxiliary variables:
//!
//! ```txt
//! maximize z
//!   z * t_q <= t
//!   t <= a1[k] S_d + a2[k] N_c D c + a3[k] S_u          for every k
//!   S_d / r_d + N_c D c / f + S_u / r_u <= t_q <= t_qos
//!   r_d <= R_d,l      r_u <= R_u,l      R_d,l <= rt_d   R_u,l <= rt_u
//!   a1[k] rt_d <= r1[k] <= R_1,k
//!   a2[k] f    <= r2[k] <= R_2,k
//!   a3[k] rt_u <= r3[k] <= R_3,k
//! ```
//!
//! plus the power budgets and frequency range. Every variable except the
//! power coefficients is carried as a logarithm, which makes the products
//! linear and the round-time constraint a sum of exponentials. Each
//! iteration then replaces
//!
//! - the rates with the bounds from [`crate::surrogate`],
//! - the data sum with its weighted geometric mean,
//! - `exp(ln rt)` with its tangent.
//!
//! All of these are conservative, so every iterate stays feasible for the
//! original problem.

use std::fmt;
use std::time::{Duration, Instant};

use crate::cvxsolve::{self, ConvexProgram, SolveStatus, Tolerances};
use crate::error::Result;
use crate::expr::{Affine, Atom, Expr};
use crate::num::{max_of, Scalar};
use crate::rates::{evaluate, Allocation, RateReport};
use crate::surrogate::{
    build_terms, log_lower_bound, log_upper_bound, powers_vector, units, VarLayout,
};
use crate::sysmodel::{ChannelState, SystemConfig};

/// Strictness margin used to build the initial interior point.
pub const INIT_MARGIN: f64 = 1e-3;

/// Epigraph auxiliaries, SI units: bits, seconds, bit/s; `a2` in bit/cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Auxiliaries<T> {
    pub t: T,
    pub t_q: T,
    pub z: T,
    pub r_d: T,
    pub r_u: T,
    pub rt_d: T,
    pub rt_u: T,
    pub a1: Vec<T>,
    pub a2: Vec<T>,
    pub a3: Vec<T>,
    pub r1: Vec<T>,
    pub r2: Vec<T>,
    pub r3: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaState<T> {
    pub allocation: Allocation<T>,
    pub aux: Auxiliaries<T>,
    pub iteration: usize,
}

impl<T: Scalar> ScaState<T> {
    /// Decision vector in solver units, log slots as logarithms.
    pub fn to_vector(&self, layout: &VarLayout) -> Vec<T> {
        let mut v = powers_vector(&self.allocation, layout);
        let rate = T::lit(1.0 / units::RATE);
        let aux = &self.aux;
        v[layout.f()] = (self.allocation.f / T::lit(units::FREQ)).ln();
        v[layout.t()] = (aux.t / T::lit(units::BITS)).ln();
        v[layout.t_q()] = aux.t_q.ln();
        v[layout.z()] = (aux.z * rate).ln();
        v[layout.r_d()] = (aux.r_d * rate).ln();
        v[layout.r_u()] = (aux.r_u * rate).ln();
        v[layout.rt_d()] = (aux.rt_d * rate).ln();
        v[layout.rt_u()] = (aux.rt_u * rate).ln();
        let a2_scale = T::lit(units::FREQ / units::RATE);
        for k in 0..layout.k {
            v[layout.a1(k)] = aux.a1[k].ln();
            v[layout.a2(k)] = (aux.a2[k] * a2_scale).ln();
            v[layout.a3(k)] = aux.a3[k].ln();
            v[layout.r1(k)] = (aux.r1[k] * rate).ln();
            v[layout.r2(k)] = (aux.r2[k] * rate).ln();
            v[layout.r3(k)] = (aux.r3[k] * rate).ln();
        }
        v
    }

    pub fn from_vector(v: &[T], layout: &VarLayout, iteration: usize) -> Self {
        let rate = T::lit(units::RATE);
        let nat = |i: usize| if layout.is_log(i) { v[i].exp() } else { v[i] };
        let pick = |f: &dyn Fn(usize) -> usize, n: usize, s: T| (0..n).map(|i| nat(f(i)) * s).collect::<Vec<T>>();
        let one = T::one();
        let allocation = Allocation {
            eta_d: pick(&|i| layout.eta_d(i), layout.l, one),
            zeta_1: pick(&|i| layout.zeta_1(i), layout.k, one),
            zeta_2: pick(&|i| layout.zeta_2(i), layout.k, one),
            eta_u: pick(&|i| layout.eta_u(i), layout.l, one),
            zeta_3: pick(&|i| layout.zeta_3(i), layout.k, one),
            f: nat(layout.f()) * T::lit(units::FREQ),
        };
        let aux = Auxiliaries {
            t: nat(layout.t()) * T::lit(units::BITS),
            t_q: nat(layout.t_q()),
            z: nat(layout.z()) * rate,
            r_d: nat(layout.r_d()) * rate,
            r_u: nat(layout.r_u()) * rate,
            rt_d: nat(layout.rt_d()) * rate,
            rt_u: nat(layout.rt_u()) * rate,
            a1: pick(&|k| layout.a1(k), layout.k, one),
            a2: pick(&|k| layout.a2(k), layout.k, T::lit(units::RATE / units::FREQ)),
            a3: pick(&|k| layout.a3(k), layout.k, one),
            r1: pick(&|k| layout.r1(k), layout.k, rate),
            r2: pick(&|k| layout.r2(k), layout.k, rate),
            r3: pick(&|k| layout.r3(k), layout.k, rate),
        };
        Self { allocation, aux, iteration }
    }
}

/// Largest `t` and smallest `t_q` admitted by the ratio form of the
/// problem for a fixed allocation:
/// `t <= R_1,k/R_d S_d + R_2,k N_c D c / f + R_3,k/R_u S_u` for every `k`
/// and `S_d/R_d + N_c D c/f + S_u/R_u <= t_q`. Their ratio is the exact min
/// effective rate.
pub fn ratio_form_bounds<T: Scalar>(report: &RateReport<T>, a: &Allocation<T>, cfg: &SystemConfig<T>) -> (T, T) {
    let (rd, ru) = (report.r_d_group, report.r_u_group);
    let t = (0..report.r_1.len())
        .map(|k| {
            report.r_1[k] / rd * cfg.global_update_bits
                + report.r_2[k] / a.f * cfg.compute_cycles()
                + report.r_3[k] / ru * cfg.local_update_bits
        })
        .fold(T::infinity(), T::min);
    let t_q = cfg.global_update_bits / rd + cfg.compute_time(a.f) + cfg.local_update_bits / ru;
    (t, t_q)
}

/// Strictly feasible starting point: the equal-power allocation shrunk by
/// [`INIT_MARGIN`], frequency just below `f_max`, auxiliaries relaxed by the
/// same margin. `None` when the round deadline cannot be met there.
pub fn initialize<T: Scalar>(ch: &ChannelState<T>, cfg: &SystemConfig<T>) -> Result<Option<ScaState<T>>> {
    cfg.validate()?;
    let (l, k) = (cfg.fl_users, cfg.nfl_users);
    let shrink = T::one() - T::lit(INIT_MARGIN);
    let grow = T::one() + T::lit(INIT_MARGIN);
    let s1 = shrink / T::from_usize_lossy(l + k);
    let own = shrink / T::from_usize_lossy(k);
    let a = Allocation {
        eta_d: vec![s1; l],
        zeta_1: vec![s1; k],
        zeta_2: vec![own; k],
        eta_u: vec![shrink; l],
        zeta_3: vec![own; k],
        f: cfg.f_max * shrink,
    };
    let rep = evaluate(&a, ch, cfg)?;
    if !(rep.round_time() <= cfg.t_qos) {
        return Ok(None);
    }
    let r_d = rep.r_d_group * shrink;
    let r_u = rep.r_u_group * shrink;
    let rt_d = max_of(&rep.r_d_fl) * grow;
    let rt_u = max_of(&rep.r_u_fl) * grow;
    let r1: Vec<T> = rep.r_1.iter().map(|&r| r * shrink).collect();
    let r2: Vec<T> = rep.r_2.iter().map(|&r| r * shrink).collect();
    let r3: Vec<T> = rep.r_3.iter().map(|&r| r * shrink).collect();
    let a1: Vec<T> = r1.iter().map(|&r| r / rt_d * shrink).collect();
    let a2: Vec<T> = r2.iter().map(|&r| r / a.f * shrink).collect();
    let a3: Vec<T> = r3.iter().map(|&r| r / rt_u * shrink).collect();
    let round = cfg.global_update_bits / r_d + cfg.compute_time(a.f) + cfg.local_update_bits / r_u;
    if !(round < cfg.t_qos) {
        return Ok(None);
    }
    let t_q = (round * grow).min((round + cfg.t_qos) / T::lit(2.0));
    let data = (0..k)
        .map(|j| a1[j] * cfg.global_update_bits + a2[j] * cfg.compute_cycles() + a3[j] * cfg.local_update_bits);
    let t = data.fold(T::infinity(), T::min) * shrink;
    let z = t / t_q * shrink;
    Ok(Some(ScaState {
        allocation: a,
        aux: Auxiliaries { t, t_q, z, r_d, r_u, rt_d, rt_u, a1, a2, a3, r1, r2, r3 },
        iteration: 0,
    }))
}

fn var<T: Scalar>(i: usize) -> Affine<T> {
    Affine::var(i)
}

/// Tangent of `exp(x[i])` at `x[i] = v_n`, a global under-estimator.
fn exp_minorant<T: Scalar>(i: usize, v_n: T) -> Affine<T> {
    let e = v_n.exp();
    Affine::constant(e * (T::one() - v_n)).with_term(i, e)
}

/// The convex subproblem at expansion point `s`, and `s` in solver units.
pub fn build_subproblem<T: Scalar>(
    s: &ScaState<T>,
    ch: &ChannelState<T>,
    cfg: &SystemConfig<T>,
) -> Result<(ConvexProgram<T>, Vec<T>)> {
    let lay = VarLayout::new(cfg.fl_users, cfg.nfl_users);
    let x_n = s.to_vector(&lay);
    let terms = build_terms(&s.allocation, ch, cfg, &lay)?;
    let names = (0..lay.len()).map(|i| lay.name(i)).collect();
    let mut p = ConvexProgram::new(names, lay.z());
    let one = T::one();
    let neg = -one;
    let (l, k) = (lay.l, lay.k);
    let s_d = cfg.global_update_bits / T::lit(units::BITS);
    let s_u = cfg.local_update_bits / T::lit(units::BITS);
    let cycles = cfg.compute_cycles() / T::lit(units::CYCLES);

    let mut budget = Affine::constant(neg);
    for i in 0..l {
        budget = budget.with_term(lay.eta_d(i), one);
    }
    for j in 0..k {
        budget = budget.with_term(lay.zeta_1(j), one);
    }
    p.push(budget.into(), "s1_power_budget");
    for (tag, f) in [("s2_power_budget", VarLayout::zeta_2 as fn(&VarLayout, usize) -> usize), ("s3_power_budget", VarLayout::zeta_3)] {
        let mut b = Affine::constant(neg);
        for j in 0..k {
            b = b.with_term(f(&lay, j), one);
        }
        p.push(b.into(), tag);
    }
    for i in 0..l {
        p.push(Affine::constant(neg).with_term(lay.eta_u(i), one).into(), format!("uplink_power_limit[{i}]"));
    }
    for i in 0..lay.len() {
        if lay.is_log(i) {
            continue;
        }
        p.push(Affine::constant(T::zero()).with_term(i, neg).into(), format!("nonneg[{}]", lay.name(i)));
    }
    let f_scale = T::lit(units::FREQ);
    if cfg.f_min > T::zero() {
        p.push(Affine::constant((cfg.f_min / f_scale).ln()).with_term(lay.f(), neg).into(), "f_min");
    }
    p.push(Affine::constant(-(cfg.f_max / f_scale).ln()).with_term(lay.f(), one).into(), "f_max");
    p.push(Affine::constant(-cfg.t_qos.ln()).with_term(lay.t_q(), one).into(), "t_q<=t_qos");
    p.push(
        Affine::constant(T::zero()).with_term(lay.z(), one).with_term(lay.t_q(), one).with_term(lay.t(), neg).into(),
        "z*t_q<=t",
    );

    let minorant = |i: usize| exp_minorant(i, x_n[i]);
    for j in 0..k {
        // ln of the data sum, bounded below by its weighted geometric mean.
        let parts = [(lay.a1(j), s_d), (lay.a2(j), cycles), (lay.a3(j), s_u)];
        let total = parts.iter().fold(T::zero(), |acc, &(i, c)| acc + c * x_n[i].exp());
        let mut data = Affine::constant(T::zero()).with_term(lay.t(), one);
        for (i, c) in parts {
            let w = c * x_n[i].exp() / total;
            data = data.with_term(i, -w);
            data.constant = data.constant - w * (c / w).ln();
        }
        p.push(data.into(), format!("data[{j}]"));
    }
    let shifted = |i: usize, c: T| Atom::Exp {
        coeff: one,
        arg: Affine::constant(c.ln()).with_term(i, neg).with_term(lay.t_q(), neg),
    };
    let round = Expr {
        affine: Affine::constant(neg),
        atoms: vec![shifted(lay.r_d(), s_d), shifted(lay.f(), cycles), shifted(lay.r_u(), s_u)],
    };
    p.push(round, "round_time<=t_q");

    let lower = |p: &mut ConvexProgram<T>, term, rate_var: usize, tag: String| -> Result<()> {
        let lb = log_lower_bound(term)?;
        p.push(lb.neg().plus(&Expr { affine: Affine::constant(T::zero()), atoms: vec![Atom::Exp { coeff: one, arg: var(rate_var) }] }), tag);
        Ok(())
    };
    for i in 0..l {
        lower(&mut p, &terms.fl_down[i], lay.r_d(), format!("r_d<=R_d[{i}]"))?;
        lower(&mut p, &terms.fl_up[i], lay.r_u(), format!("r_u<=R_u[{i}]"))?;
    }
    for j in 0..k {
        lower(&mut p, &terms.s1[j], lay.r1(j), format!("r1<=R_1[{j}]"))?;
        lower(&mut p, &terms.s2[j], lay.r2(j), format!("r2<=R_2[{j}]"))?;
        lower(&mut p, &terms.s3[j], lay.r3(j), format!("r3<=R_3[{j}]"))?;
    }
    for j in 0..k {
        let pairs = [
            (lay.a1(j), lay.rt_d(), lay.r1(j), "a1*rt_d<=r1"),
            (lay.a2(j), lay.f(), lay.r2(j), "a2*f<=r2"),
            (lay.a3(j), lay.rt_u(), lay.r3(j), "a3*rt_u<=r3"),
        ];
        for (u, v, r, tag) in pairs {
            let c = Affine::constant(T::zero()).with_term(u, one).with_term(v, one).with_term(r, neg);
            p.push(c.into(), format!("{tag}[{j}]"));
        }
    }
    for i in 0..l {
        let ub = log_upper_bound(&terms.fl_down[i])?;
        p.push(ub.plus_affine(&minorant(lay.rt_d()).scaled(neg)), format!("R_d[{i}]<=rt_d"));
        let ub = log_upper_bound(&terms.fl_up[i])?;
        p.push(ub.plus_affine(&minorant(lay.rt_u()).scaled(neg)), format!("R_u[{i}]<=rt_u"));
    }
    Ok((p, x_n))
}

/// Outcome of one convexify-and-solve step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<T> {
    pub state: ScaState<T>,
    pub solver_status: SolveStatus,
    pub newton_iters: usize,
}

/// Solves the subproblem at `s` and returns its optimizer as the next state.
pub fn iterate<T: Scalar>(s: &ScaState<T>, ch: &ChannelState<T>, cfg: &SystemConfig<T>, tol: &Tolerances) -> Result<Step<T>> {
    let (p, x_n) = build_subproblem(s, ch, cfg)?;
    let sol = cvxsolve::solve(&p, &x_n, tol)?;
    let lay = VarLayout::new(cfg.fl_users, cfg.nfl_users);
    Ok(Step {
        state: ScaState::from_vector(&sol.x, &lay, s.iteration + 1),
        solver_status: sol.status,
        newton_iters: sol.newton_iters,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub solver: Tolerances,
    /// Keep every iterate's allocation in the report.
    pub keep_iterates: bool,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self { max_iter: 50, rel_tol: 1e-4, solver: Tolerances::default(), keep_iterates: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaStatus {
    Converged,
    MaxIter,
    InfeasibleInstance,
    /// The subproblem solver errored; the last good state is reported.
    SolverFailure,
}

impl fmt::Display for ScaStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Converged => write!(f, "converged"),
            Self::MaxIter => write!(f, "max-iter"),
            Self::InfeasibleInstance => write!(f, "infeasible-instance"),
            Self::SolverFailure => write!(f, "solver-failure"),
        }
    }
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    /// Surrogate objective `z`, bit/s.
    pub z: T,
    /// Exact min effective rate of the iterate's allocation, bit/s.
    pub min_eff_rate: T,
    pub newton_iters: usize,
    pub solver_status: Option<SolveStatus>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T> {
    pub allocation: Option<Allocation<T>>,
    pub final_state: Option<ScaState<T>>,
    /// `z` per iteration (bit/s), starting with the initial point.
    pub z_trace: Vec<T>,
    pub trace: Vec<IterationRecord<T>>,
    /// Exact min effective rate at the final allocation, bit/s (0 if infeasible).
    pub min_eff_rate: T,
    pub iterations: usize,
    pub status: ScaStatus,
    pub wall_time: Duration,
    pub iterates: Vec<Allocation<T>>,
}

impl<T: Scalar> SolveReport<T> {
    fn infeasible(start: Instant) -> Self {
        Self {
            allocation: None,
            final_state: None,
            z_trace: Vec::new(),
            trace: Vec::new(),
            min_eff_rate: T::zero(),
            iterations: 0,
            status: ScaStatus::InfeasibleInstance,
            wall_time: start.elapsed(),
            iterates: Vec::new(),
        }
    }

    /// Everything except the wall time, for determinism checks.
    pub fn same_result(&self, other: &Self) -> bool {
        self.allocation == other.allocation
            && self.z_trace == other.z_trace
            && self.min_eff_rate == other.min_eff_rate
            && self.iterations == other.iterations
            && self.status == other.status
    }

    pub const CSV_HEADER: [&'static str; 7] =
        ["status", "iterations", "min_eff_rate_bps", "final_z_bps", "initial_z_bps", "f_hz", "wall_time_s"];

    /// Row matching [`SolveReport::CSV_HEADER`].
    pub fn csv_row(&self) -> Vec<String> {
        let z_last = self.z_trace.last().copied().unwrap_or(T::zero());
        let z_first = self.z_trace.first().copied().unwrap_or(T::zero());
        let f = self.allocation.as_ref().map_or(T::zero(), |a| a.f);
        vec![
            self.status.to_string(),
            self.iterations.to_string(),
            format!("{:.9e}", self.min_eff_rate),
            format!("{z_last:.9e}"),
            format!("{z_first:.9e}"),
            format!("{f:.9e}"),
            format!("{:.6}", self.wall_time.as_secs_f64()),
        ]
    }
}

/// Runs the SCA loop until the relative change in `z` drops below
/// `opts.rel_tol` or `opts.max_iter` iterations have run.
pub fn run<T: Scalar>(ch: &ChannelState<T>, cfg: &SystemConfig<T>, opts: &ScaOptions) -> Result<SolveReport<T>> {
    let start = Instant::now();
    let Some(mut state) = initialize(ch, cfg)? else {
        return Ok(SolveReport::infeasible(start));
    };
    let exact = |a: &Allocation<T>| evaluate(a, ch, cfg).map(|r| r.min_eff_rate);
    let mut z_trace = vec![state.aux.z];
    let mut trace = vec![IterationRecord {
        iteration: 0,
        z: state.aux.z,
        min_eff_rate: exact(&state.allocation)?,
        newton_iters: 0,
        solver_status: None,
    }];
    let mut iterates = Vec::new();
    if opts.keep_iterates {
        iterates.push(state.allocation.clone());
    }
    let mut status = ScaStatus::MaxIter;
    let tiny = T::lit(1e-12);
    for _ in 0..opts.max_iter {
        let step = match iterate(&state, ch, cfg, &opts.solver) {
            Ok(step) => step,
            Err(_) => {
                status = ScaStatus::SolverFailure;
                break;
            }
        };
        let z_old = state.aux.z;
        state = step.state;
        let z_new = state.aux.z;
        z_trace.push(z_new);
        trace.push(IterationRecord {
            iteration: state.iteration,
            z: z_new,
            min_eff_rate: exact(&state.allocation)?,
            newton_iters: step.newton_iters,
            solver_status: Some(step.solver_status),
        });
        if opts.keep_iterates {
            iterates.push(state.allocation.clone());
        }
        if (z_new - z_old).abs() / z_old.abs().max(tiny) <= T::lit(opts.rel_tol) {
            status = ScaStatus::Converged;
            break;
        }
    }
    let min_eff_rate = exact(&state.allocation)?;
    Ok(SolveReport {
        allocation: Some(state.allocation.clone()),
        iterations: state.iteration,
        final_state: Some(state),
        z_trace,
        trace,
        min_eff_rate,
        status,
        wall_time: start.elapsed(),
        iterates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::check_feasibility;
    use crate::sysmodel::sample_layout;

    fn small_cfg() -> SystemConfig<f64> {
        let mut cfg = SystemConfig::reference();
        cfg.set_fl_users(2);
        cfg.nfl_users = 2;
        cfg.antennas = 32;
        cfg
    }

    #[test]
    fn initial_point_is_strictly_feasible() {
        let cfg = small_cfg();
        let ch = sample_layout(&cfg, 3).unwrap();
        let s = initialize(&ch, &cfg).unwrap().expect("feasible");
        assert!(check_feasibility(&s.allocation, &ch, &cfg).unwrap().is_empty());
        let (p, x) = build_subproblem(&s, &ch, &cfg).unwrap();
        assert_eq!(p.first_non_strict(&x), None, "{}", p.dump());
        for c in &p.constraints {
            assert!(c.expr.is_convex(), "{}", c.tag);
        }
    }

    #[test]
    fn generous_and_impossible_deadlines() {
        let mut cfg = small_cfg();
        cfg.t_qos = 100.0;
        let ch = sample_layout(&cfg, 4).unwrap();
        let s = initialize(&ch, &cfg).unwrap().expect("feasible");
        assert!(check_feasibility(&s.allocation, &ch, &cfg).unwrap().is_empty());
        cfg.t_qos = 0.5 * cfg.compute_time(cfg.f_max);
        assert!(initialize(&ch, &cfg).unwrap().is_none());
        let rep = run(&ch, &cfg, &ScaOptions::default()).unwrap();
        assert_eq!(rep.status, ScaStatus::InfeasibleInstance);
    }

    #[test]
    fn vector_round_trip() {
        let cfg = small_cfg();
        let ch = sample_layout(&cfg, 5).unwrap();
        let s = initialize(&ch, &cfg).unwrap().unwrap();
        let lay = VarLayout::new(2, 2);
        let back = ScaState::from_vector(&s.to_vector(&lay), &lay, 0);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1e-300);
        assert!(close(back.aux.a2[1], s.aux.a2[1]));
        assert!(close(back.aux.z, s.aux.z));
        assert!(close(back.allocation.f, s.allocation.f));
    }

    #[test]
    fn one_iteration_increases_z() {
        let cfg = small_cfg();
        let ch = sample_layout(&cfg, 6).unwrap();
        let s = initialize(&ch, &cfg).unwrap().unwrap();
        let step = iterate(&s, &ch, &cfg, &Tolerances::default()).unwrap();
        assert!(step.state.aux.z > s.aux.z);
        assert!(check_feasibility(&step.state.allocation, &ch, &cfg).unwrap().is_empty());
    }

    #[test]
    fn run_is_deterministic_and_consistent() {
        let cfg = small_cfg();
        let ch = sample_layout(&cfg, 7).unwrap();
        let a = run(&ch, &cfg, &ScaOptions::default()).unwrap();
        let b = run(&ch, &cfg, &ScaOptions::default()).unwrap();
        assert!(a.same_result(&b));
        let z = *a.z_trace.last().unwrap();
        assert!(a.min_eff_rate >= z * (1.0 - 1e-6), "{} < {}", a.min_eff_rate, z);
        for w in a.z_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8 * w[0].abs());
        }
    }

    #[test]
    fn fixed_point_after_convergence() {
        let cfg = small_cfg();
        let ch = sample_layout(&cfg, 8).unwrap();
        let opts = ScaOptions { rel_tol: 1e-9, max_iter: 200, ..Default::default() };
        let rep = run(&ch, &cfg, &opts).unwrap();
        let s = rep.final_state.unwrap();
        let next = iterate(&s, &ch, &cfg, &Tolerances::default()).unwrap();
        assert!((next.state.aux.z - s.aux.z).abs() <= 1e-6 * s.aux.z, "{} vs {}", next.state.aux.z, s.aux.z);
    }

    #[test]
    fn ratio_form_reproduces_objective() {
        let cfg = small_cfg();
        let ch = sample_layout(&cfg, 9).unwrap();
        let a = Allocation { eta_d: vec![0.2, 0.3], zeta_1: vec![0.25, 0.2], zeta_2: vec![0.6, 0.4], eta_u: vec![1.0, 0.7], zeta_3: vec![0.5, 0.5], f: 1e8 };
        let rep = evaluate(&a, &ch, &cfg).unwrap();
        let (t, t_q) = ratio_form_bounds(&rep, &a, &cfg);
        assert!((t / t_q - rep.min_eff_rate).abs() <= 1e-9 * rep.min_eff_rate);
    }
}
