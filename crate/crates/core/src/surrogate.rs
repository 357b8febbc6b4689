//! Convex inner-approximation bounds around an expansion point.
//!
//! Every achievable rate is `prelog * ln(1 + x/y)` with `x` (the SINR
//! numerator) and `y` (the denominator) affine in the power coefficients.
//! Three bound families are built here:
//!
//! * a concave lower bound on `ln(1 + x/y)`,
//! * a convex upper bound on `ln(1 + x/y)`,
//! * a convex quadratic upper bound on a product `u * v`.
//!
//! Each is tight at the expansion point and matches the bounded function's
//! gradient there.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::expr::{Affine, Atom, Expr};
use crate::num::Scalar;
use crate::rates::{prelog, Allocation};
use crate::sysmodel::{ChannelState, SystemConfig};

/// Unit scaling used inside the convex subproblem.
///
/// Rates are Mbit/s, data volumes Mbit, frequencies GHz and cycle counts
/// Gcycles; times stay in seconds.
pub mod units {
    pub const RATE: f64 = 1e6;
    pub const BITS: f64 = 1e6;
    pub const FREQ: f64 = 1e9;
    pub const CYCLES: f64 = 1e9;
}

/// `prelog * ln(1 + x/y)` with its expansion point.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRatioTerm<T> {
    pub x: Affine<T>,
    pub y: Affine<T>,
    pub x_n: T,
    pub y_n: T,
    /// Multiplier of the natural log (already divided by `ln 2`).
    pub prelog: T,
}

impl<T: Scalar> LinearRatioTerm<T> {
    fn check(&self) -> Result<()> {
        if self.x_n > T::zero() && self.y_n > T::zero() && self.x_n.is_finite() && self.y_n.is_finite() {
            Ok(())
        } else {
            Err(Error::Expansion(format!("x_n={}, y_n={}", self.x_n, self.y_n)))
        }
    }

    /// The bounded function at `(x, y)`.
    pub fn exact(&self, x: T, y: T) -> T {
        self.prelog * (T::one() + x / y).ln()
    }

    pub fn exact_at(&self, v: &[T]) -> T {
        self.exact(self.x.eval(v), self.y.eval(v))
    }
}

/// Concave minorant of `prelog * ln(1 + x/y)`:
///
/// `ln(1+xn/yn) + 2xn/(xn+yn) - xn^2/((xn+yn) x) - xn y/((xn+yn) yn)`.
pub fn log_lower_bound<T: Scalar>(term: &LinearRatioTerm<T>) -> Result<Expr<T>> {
    term.check()?;
    let (xn, yn, c) = (term.x_n, term.y_n, term.prelog);
    let s = xn + yn;
    let constant = c * ((T::one() + xn / yn).ln() + T::lit(2.0) * xn / s);
    let affine = Affine::constant(constant).plus(&term.y.scaled(-c * xn / (s * yn)));
    Ok(Expr {
        affine,
        atoms: vec![Atom::Reciprocal { coeff: -c * xn * xn / s, arg: term.x.clone() }],
    })
}

/// Convex majorant of `prelog * ln(1 + x/y)`:
///
/// `ln(1+xn/yn) + yn/(xn+yn) * ((x^2 + xn^2)/(2 xn y) - xn/yn)`.
pub fn log_upper_bound<T: Scalar>(term: &LinearRatioTerm<T>) -> Result<Expr<T>> {
    term.check()?;
    let (xn, yn, c) = (term.x_n, term.y_n, term.prelog);
    let s = xn + yn;
    let two = T::lit(2.0);
    let constant = c * ((T::one() + xn / yn).ln() - xn / s);
    Ok(Expr {
        affine: Affine::constant(constant),
        atoms: vec![
            Atom::QuadOverLin { coeff: c * yn / (s * two * xn), num: term.x.clone(), den: term.y.clone() },
            Atom::Reciprocal { coeff: c * yn * xn / (two * s), arg: term.y.clone() },
        ],
    })
}

/// Convex majorant of `u * v` for `u, v >= 0`:
///
/// `1/4 [(u+v)^2 - 2(un-vn)(u-v) + (un-vn)^2]`.
pub fn bilinear_upper_bound<T: Scalar>(u: &Affine<T>, v: &Affine<T>, u_n: T, v_n: T) -> Expr<T> {
    let quarter = T::lit(0.25);
    let d = u_n - v_n;
    let diff = u.plus(&v.scaled(-T::one()));
    let affine = diff.scaled(-T::lit(0.5) * d).plus(&Affine::constant(quarter * d * d));
    Expr { affine, atoms: vec![Atom::Square { coeff: quarter, arg: u.plus(v) }] }
}

/// Index map of the subproblem's decision vector.
///
/// Layout: `eta_d[L] zeta_1[K] zeta_2[K] eta_u[L] zeta_3[K] f t t_q z r_d r_u
/// rt_d rt_u a1[K] a2[K] a3[K] r1[K] r2[K] r3[K]`.
///
/// The slots flagged by [`VarLayout::is_log`] hold the natural logarithm of
/// the quantity in solver units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub l: usize,
    pub k: usize,
}

impl VarLayout {
    pub fn new(l: usize, k: usize) -> Self {
        Self { l, k }
    }

    pub fn eta_d(&self, i: usize) -> usize {
        i
    }
    pub fn zeta_1(&self, k: usize) -> usize {
        self.l + k
    }
    pub fn zeta_2(&self, k: usize) -> usize {
        self.l + self.k + k
    }
    pub fn eta_u(&self, i: usize) -> usize {
        self.l + 2 * self.k + i
    }
    pub fn zeta_3(&self, k: usize) -> usize {
        2 * self.l + 2 * self.k + k
    }
    pub fn powers(&self) -> usize {
        2 * self.l + 3 * self.k
    }
    pub fn f(&self) -> usize {
        self.powers()
    }
    pub fn t(&self) -> usize {
        self.powers() + 1
    }
    pub fn t_q(&self) -> usize {
        self.powers() + 2
    }
    pub fn z(&self) -> usize {
        self.powers() + 3
    }
    pub fn r_d(&self) -> usize {
        self.powers() + 4
    }
    pub fn r_u(&self) -> usize {
        self.powers() + 5
    }
    pub fn rt_d(&self) -> usize {
        self.powers() + 6
    }
    pub fn rt_u(&self) -> usize {
        self.powers() + 7
    }
    fn block(&self, b: usize, k: usize) -> usize {
        self.powers() + 8 + b * self.k + k
    }
    pub fn a1(&self, k: usize) -> usize {
        self.block(0, k)
    }
    pub fn a2(&self, k: usize) -> usize {
        self.block(1, k)
    }
    pub fn a3(&self, k: usize) -> usize {
        self.block(2, k)
    }
    pub fn r1(&self, k: usize) -> usize {
        self.block(3, k)
    }
    pub fn r2(&self, k: usize) -> usize {
        self.block(4, k)
    }
    pub fn r3(&self, k: usize) -> usize {
        self.block(5, k)
    }
    pub fn len(&self) -> usize {
        self.powers() + 8 + 6 * self.k
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Every slot after the power coefficients is carried in log form.
    pub fn is_log(&self, i: usize) -> bool {
        i >= self.powers() && i < self.len()
    }

    pub fn name(&self, i: usize) -> String {
        let (l, k, p) = (self.l, self.k, self.powers());
        match i {
            _ if i < l => format!("eta_d[{i}]"),
            _ if i < l + k => format!("zeta_1[{}]", i - l),
            _ if i < l + 2 * k => format!("zeta_2[{}]", i - l - k),
            _ if i < 2 * l + 2 * k => format!("eta_u[{}]", i - l - 2 * k),
            _ if i < p => format!("zeta_3[{}]", i - 2 * l - 2 * k),
            _ if i < p + 8 => ["ln_f", "ln_t", "ln_t_q", "ln_z", "ln_r_d", "ln_r_u", "ln_rt_d", "ln_rt_u"][i - p].to_string(),
            _ => {
                let j = i - p - 8;
                let names = ["ln_a1", "ln_a2", "ln_a3", "ln_r1", "ln_r2", "ln_r3"];
                format!("{}[{}]", names[j / k], j % k)
            }
        }
    }
}

/// Every rate term of the subproblem, in Mbit/s.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateTerms<T> {
    pub fl_down: Vec<LinearRatioTerm<T>>,
    pub fl_up: Vec<LinearRatioTerm<T>>,
    pub s1: Vec<LinearRatioTerm<T>>,
    pub s2: Vec<LinearRatioTerm<T>>,
    pub s3: Vec<LinearRatioTerm<T>>,
}

/// Builds the `2L + 3K` numerator/denominator pairs as affine functions of
/// the layout's power variables, with expansion constants from `a_n`.
///
/// Interference terms use the estimation-error power `beta - sigma^2`
/// everywhere, matching [`crate::rates`].
pub fn build_terms<T: Scalar>(
    a_n: &Allocation<T>,
    ch: &ChannelState<T>,
    cfg: &SystemConfig<T>,
    layout: &VarLayout,
) -> Result<SurrogateTerms<T>> {
    let (l, k, m) = (layout.l, layout.k, cfg.antennas);
    let ln2 = T::LN_2();
    let scale = T::lit(units::RATE);
    let pl = |tau, half| prelog(tau, cfg, half) / (ln2 * scale);
    let g_s1 = T::from_usize_lossy(m - l - k);
    let g_nfl = T::from_usize_lossy(m - k);
    let g_ul = T::from_usize_lossy(m - l);

    let s1_load = |err: T| {
        let mut y = Affine::constant(T::one());
        for i in 0..l {
            y = y.with_term(layout.eta_d(i), cfg.rho_d * err);
        }
        for j in 0..k {
            y = y.with_term(layout.zeta_1(j), cfg.rho_d * err);
        }
        y
    };
    let own_load = |err: T, var: &dyn Fn(usize) -> usize| {
        let mut y = Affine::constant(T::one());
        for j in 0..k {
            y = y.with_term(var(j), cfg.rho_d * err);
        }
        y
    };
    let make = |x: Affine<T>, y: Affine<T>, prelog: T, v: &[T]| -> Result<LinearRatioTerm<T>> {
        let term = LinearRatioTerm { x_n: x.eval(v), y_n: y.eval(v), x, y, prelog };
        term.check()?;
        Ok(term)
    };

    let v = powers_vector(a_n, layout);

    let fl_down = (0..l)
        .map(|i| {
            let x = Affine::constant(T::zero()).with_term(layout.eta_d(i), cfg.rho_d * g_s1 * ch.sigma2_d[i]);
            make(x, s1_load(ch.beta_fl[i] - ch.sigma2_d[i]), pl(cfg.pilot_s1_fl, false), &v)
        })
        .collect::<Result<_>>()?;
    let fl_up = (0..l)
        .map(|i| {
            let x = Affine::constant(T::zero()).with_term(layout.eta_u(i), cfg.rho_u * g_ul * ch.sigma2_u[i]);
            let mut y = Affine::constant(T::one());
            for j in 0..l {
                y = y.with_term(layout.eta_u(j), cfg.rho_u * (ch.beta_fl[j] - ch.sigma2_u[j]));
            }
            make(x, y, pl(cfg.pilot_s3_fl, true), &v)
        })
        .collect::<Result<_>>()?;
    let s1 = (0..k)
        .map(|j| {
            let x = Affine::constant(T::zero()).with_term(layout.zeta_1(j), cfg.rho_d * g_s1 * ch.sigma2_1[j]);
            make(x, s1_load(ch.beta_nfl[j] - ch.sigma2_1[j]), pl(cfg.pilot_s1_nfl, false), &v)
        })
        .collect::<Result<_>>()?;
    let s2 = (0..k)
        .map(|j| {
            let x = Affine::constant(T::zero()).with_term(layout.zeta_2(j), cfg.rho_d * g_nfl * ch.sigma2_2[j]);
            let y = own_load(ch.beta_nfl[j] - ch.sigma2_2[j], &|i| layout.zeta_2(i));
            make(x, y, pl(cfg.pilot_s2, false), &v)
        })
        .collect::<Result<_>>()?;
    let s3 = (0..k)
        .map(|j| {
            let x = Affine::constant(T::zero()).with_term(layout.zeta_3(j), cfg.rho_d * g_nfl * ch.sigma2_3[j]);
            let y = own_load(ch.beta_nfl[j] - ch.sigma2_3[j], &|i| layout.zeta_3(i));
            make(x, y, pl(cfg.pilot_s3_nfl, true), &v)
        })
        .collect::<Result<_>>()?;
    Ok(SurrogateTerms { fl_down, fl_up, s1, s2, s3 })
}

/// Power coefficients of `a` placed at their layout positions; the rest zero.
pub fn powers_vector<T: Scalar>(a: &Allocation<T>, layout: &VarLayout) -> Vec<T> {
    let mut v = vec![T::zero(); layout.len()];
    for i in 0..layout.l {
        v[layout.eta_d(i)] = a.eta_d[i];
        v[layout.eta_u(i)] = a.eta_u[i];
    }
    for j in 0..layout.k {
        v[layout.zeta_1(j)] = a.zeta_1[j];
        v[layout.zeta_2(j)] = a.zeta_2[j];
        v[layout.zeta_3(j)] = a.zeta_3[j];
    }
    v
}

/// Term-by-term text dump of the surrogate set, for debugging and fixtures.
pub fn dump_terms<T: Scalar>(terms: &SurrogateTerms<T>, layout: &VarLayout) -> String {
    let names = |i: usize| layout.name(i);
    let mut out = String::new();
    let groups = [
        ("R_d", &terms.fl_down),
        ("R_u", &terms.fl_up),
        ("R_1", &terms.s1),
        ("R_2", &terms.s2),
        ("R_3", &terms.s3),
    ];
    for (label, group) in groups {
        for (i, t) in group.iter().enumerate() {
            let _ = writeln!(out, "{label}[{i}] prelog={:e} x_n={:e} y_n={:e}", t.prelog, t.x_n, t.y_n);
            let _ = writeln!(out, "  x = {}", crate::expr::Named { expr: &t.x.clone().into(), names: &names });
            let _ = writeln!(out, "  y = {}", crate::expr::Named { expr: &t.y.clone().into(), names: &names });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{evaluate, Allocation};
    use crate::sysmodel::sample_layout;

    fn term(x_n: f64, y_n: f64, prelog: f64) -> LinearRatioTerm<f64> {
        LinearRatioTerm { x: Affine::var(0), y: Affine::var(1), x_n, y_n, prelog }
    }

    #[test]
    fn lower_bound_examples() {
        let t = term(1.0, 1.0, 3.0);
        let lb = log_lower_bound(&t).unwrap();
        assert!((lb.eval(&[1.0, 1.0]).unwrap() - 3.0 * 2f64.ln()).abs() < 1e-14);
        let expect = 3.0 * (2f64.ln() + 0.25);
        assert!((lb.eval(&[2.0, 1.0]).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn upper_bound_examples() {
        let t = term(1.0, 1.0, 2.0);
        let ub = log_upper_bound(&t).unwrap();
        assert!((ub.eval(&[1.0, 1.0]).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-14);
        // x=1, y=2: ln2 + (1/2)*((1+1)/(2*1*2) - 1) = ln2 - 1/4
        let expect = 2.0 * (2f64.ln() - 0.25);
        assert!((ub.eval(&[1.0, 2.0]).unwrap() - expect).abs() < 1e-14);
        assert!(ub.is_convex());
        assert!(!log_lower_bound(&t).unwrap().is_convex());
        assert!(log_lower_bound(&t).unwrap().neg().is_convex());
    }

    #[test]
    fn bounds_reject_boundary_expansion() {
        assert!(matches!(log_lower_bound(&term(0.0, 1.0, 1.0)), Err(Error::Expansion(_))));
        assert!(matches!(log_upper_bound(&term(1.0, -1.0, 1.0)), Err(Error::Expansion(_))));
    }

    #[test]
    fn bilinear_examples() {
        let (u, v) = (Affine::var(0), Affine::var(1));
        let b = bilinear_upper_bound(&u, &v, 3.0, 2.0);
        assert_eq!(b.eval(&[3.0, 2.0]).unwrap(), 6.0);
        let sym = bilinear_upper_bound(&u, &v, 1.5, 1.5);
        for (x, y) in [(0.3, 2.0), (4.0, 1.0), (0.0, 0.0)] {
            let am_gm: f64 = 0.25 * (x + y) * (x + y);
            assert!((sym.eval(&[x, y]).unwrap() - am_gm).abs() < 1e-14);
        }
    }

    fn layout_and_state() -> (SystemConfig<f64>, ChannelState<f64>, Allocation<f64>, VarLayout) {
        let mut cfg = SystemConfig::reference();
        cfg.set_fl_users(1);
        cfg.nfl_users = 1;
        cfg.antennas = 10;
        let ch = ChannelState::from_betas(&cfg, vec![2e-11], vec![5e-12]).unwrap();
        let a = Allocation { eta_d: vec![0.4], zeta_1: vec![0.5], zeta_2: vec![0.9], eta_u: vec![0.8], zeta_3: vec![0.7], f: 1e9 };
        (cfg, ch, a, VarLayout::new(1, 1))
    }

    #[test]
    fn build_terms_hand_computed_constants() {
        let (cfg, ch, a, layout) = layout_and_state();
        let terms = build_terms(&a, &ch, &cfg, &layout).unwrap();
        let rho_d = cfg.rho_d;
        let (b, s) = (ch.beta_fl[0], ch.sigma2_d[0]);
        let psi = rho_d * 8.0 * s * 0.4;
        let theta = 1.0 + rho_d * (b - s) * 0.4 + rho_d * (b - s) * 0.5;
        assert!((terms.fl_down[0].x_n - psi).abs() < 1e-12 * psi);
        assert!((terms.fl_down[0].y_n - theta).abs() < 1e-12 * theta);
        let (bk, s2) = (ch.beta_nfl[0], ch.sigma2_2[0]);
        assert!((terms.s2[0].x_n - rho_d * 9.0 * s2 * 0.9).abs() < 1e-12 * terms.s2[0].x_n);
        assert!((terms.s2[0].y_n - (1.0 + rho_d * (bk - s2) * 0.9)).abs() < 1e-12);
        let pl = 0.9 * 20e6 / (2f64.ln() * 1e6);
        assert!((terms.s1[0].prelog - pl).abs() < 1e-12);
        assert!((terms.s3[0].prelog - pl / 2.0).abs() < 1e-12);
        let again = build_terms(&a, &ch, &cfg, &layout).unwrap();
        assert_eq!(terms, again);
    }

    #[test]
    fn terms_reproduce_exact_rates() {
        let cfg = SystemConfig::<f64>::reference();
        let ch = sample_layout(&cfg, 11).unwrap();
        let a = Allocation::uniform(5, 5, 0.08, 2e9);
        let layout = VarLayout::new(5, 5);
        let terms = build_terms(&a, &ch, &cfg, &layout).unwrap();
        let rep = evaluate(&a, &ch, &cfg).unwrap();
        let v = powers_vector(&a, &layout);
        for k in 0..5 {
            let mbps = |t: &LinearRatioTerm<f64>| t.exact_at(&v) * 1e6;
            assert!((mbps(&terms.s1[k]) - rep.r_1[k]).abs() < 1e-9 * rep.r_1[k]);
            assert!((mbps(&terms.s2[k]) - rep.r_2[k]).abs() < 1e-9 * rep.r_2[k]);
            assert!((mbps(&terms.s3[k]) - rep.r_3[k]).abs() < 1e-9 * rep.r_3[k]);
            assert!((mbps(&terms.fl_down[k]) - rep.r_d_fl[k]).abs() < 1e-9 * rep.r_d_fl[k]);
            assert!((mbps(&terms.fl_up[k]) - rep.r_u_fl[k]).abs() < 1e-9 * rep.r_u_fl[k]);
        }
        for group in [&terms.fl_down, &terms.fl_up, &terms.s1, &terms.s2, &terms.s3] {
            assert!(group.iter().all(|t| t.x_n > 0.0 && t.y_n > 0.0));
        }
    }

    #[test]
    fn layout_names_cover_every_slot() {
        let layout = VarLayout::new(2, 3);
        let names: Vec<_> = (0..layout.len()).map(|i| layout.name(i)).collect();
        assert_eq!(names[layout.zeta_3(2)], "zeta_3[2]");
        assert_eq!(names[layout.z()], "ln_z");
        assert_eq!(names[layout.a2(1)], "ln_a2[1]");
        assert_eq!(names[layout.r3(2)], "ln_r3[2]");
        for (i, n) in names.iter().enumerate() {
            assert_eq!(layout.is_log(i), n.starts_with("ln_"), "{n}");
        }
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), layout.len());
    }

    #[test]
    fn dump_mentions_every_term() {
        let (cfg, ch, a, layout) = layout_and_state();
        let terms = build_terms(&a, &ch, &cfg, &layout).unwrap();
        let text = dump_terms(&terms, &layout);
        for label in ["R_d[0]", "R_u[0]", "R_1[0]", "R_2[0]", "R_3[0]", "eta_d[0]", "zeta_3[0]"] {
            assert!(text.contains(label), "{label} missing");
        }
    }
}
