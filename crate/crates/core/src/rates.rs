//! Closed-form zero-forcing SINRs, achievable rates, phase delays, data
//! volumes and the min effective-rate objective for one allocation.
//!
//! Phase naming follows the FL round: S1 broadcasts the global update while
//! serving non-FL users in the same band, S2 serves only non-FL users while
//! FL users compute, and S3 splits the band between FL uplink and non-FL
//! downlink.

use std::fmt;

use crate::error::{Error, Result};
use crate::num::{min_of, sum_of, Scalar};
use crate::sysmodel::{ChannelState, SystemConfig};

/// Power coefficients for every phase plus the frequency control coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation<T> {
    /// S1 downlink coefficients for FL users.
    pub eta_d: Vec<T>,
    /// S1 downlink coefficients for non-FL users.
    pub zeta_1: Vec<T>,
    /// S2 downlink coefficients.
    pub zeta_2: Vec<T>,
    /// S3 uplink coefficients for FL users.
    pub eta_u: Vec<T>,
    /// S3 downlink coefficients.
    pub zeta_3: Vec<T>,
    /// Frequency control coefficient, cycles/s.
    pub f: T,
}

impl<T: Scalar> Allocation<T> {
    /// Same coefficient `v` everywhere.
    pub fn uniform(l: usize, k: usize, v: T, f: T) -> Self {
        Self {
            eta_d: vec![v; l],
            zeta_1: vec![v; k],
            zeta_2: vec![v; k],
            eta_u: vec![v; l],
            zeta_3: vec![v; k],
            f,
        }
    }

    pub fn fl_users(&self) -> usize {
        self.eta_d.len()
    }

    pub fn nfl_users(&self) -> usize {
        self.zeta_1.len()
    }
}

/// Numerator and denominator of an SINR, kept apart for the surrogate bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinr<T> {
    pub num: T,
    pub den: T,
}

impl<T: Scalar> Sinr<T> {
    pub fn ratio(&self) -> T {
        self.num / self.den
    }
}

fn check_index(what: &'static str, index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(Error::Index { what, index, len })
    }
}

fn gain<T: Scalar>(m: usize, minus: usize) -> T {
    T::from_usize_lossy(m.saturating_sub(minus))
}

/// Broadcast-phase SINR of FL user `l`.
pub fn sinr_s1_fl<T: Scalar>(a: &Allocation<T>, ch: &ChannelState<T>, cfg: &SystemConfig<T>, l: usize) -> Result<Sinr<T>> {
    check_index("FL user", l, ch.fl_users())?;
    let (s2, beta) = (ch.sigma2_d[l], ch.beta_fl[l]);
    let load = sum_of(&a.eta_d) + sum_of(&a.zeta_1);
    Ok(Sinr {
        num: cfg.rho_d * a.eta_d[l] * gain(cfg.antennas, cfg.fl_users + cfg.nfl_users) * s2,
        den: T::one() + cfg.rho_d * (beta - s2) * load,
    })
}

/// Broadcast-phase SINR of non-FL user `k`.
pub fn sinr_s1_nfl<T: Scalar>(a: &Allocation<T>, ch: &ChannelState<T>, cfg: &SystemConfig<T>, k: usize) -> Result<Sinr<T>> {
    check_index("non-FL user", k, ch.nfl_users())?;
    let (s2, beta) = (ch.sigma2_1[k], ch.beta_nfl[k]);
    let err = beta - s2;
    Ok(Sinr {
        num: cfg.rho_d * a.zeta_1[k] * gain(cfg.antennas, cfg.fl_users + cfg.nfl_users) * s2,
        den: T::one() + cfg.rho_d * err * sum_of(&a.zeta_1) + cfg.rho_d * err * sum_of(&a.eta_d),
    })
}

/// Computation-phase SINR of non-FL user `k`; FL users are silent.
pub fn sinr_s2<T: Scalar>(a: &Allocation<T>, ch: &ChannelState<T>, cfg: &SystemConfig<T>, k: usize) -> Result<Sinr<T>> {
    check_index("non-FL user", k, ch.nfl_users())?;
    let (s2, beta) = (ch.sigma2_2[k], ch.beta_nfl[k]);
    Ok(Sinr {
        num: cfg.rho_d * a.zeta_2[k] * gain(cfg.antennas, cfg.nfl_users) * s2,
        den: T::one() + cfg.rho_d * (beta - s2) * sum_of(&a.zeta_2),
    })
}

/// Upload-phase uplink SINR of FL user `l` (zero-forcing combining).
pub fn sinr_s3_ul<T: Scalar>(a: &Allocation<T>, ch: &ChannelState<T>, cfg: &SystemConfig<T>, l: usize) -> Result<Sinr<T>> {
    check_index("FL user", l, ch.fl_users())?;
    let interference = ch
        .beta_fl
        .iter()
        .zip(&ch.sigma2_u)
        .zip(&a.eta_u)
        .fold(T::zero(), |acc, ((&b, &s), &e)| acc + (b - s) * e);
    Ok(Sinr {
        num: cfg.rho_u * a.eta_u[l] * gain(cfg.antennas, cfg.fl_users) * ch.sigma2_u[l],
        den: T::one() + cfg.rho_u * interference,
    })
}

/// Upload-phase downlink SINR of non-FL user `k`.
pub fn sinr_s3_dl<T: Scalar>(a: &Allocation<T>, ch: &ChannelState<T>, cfg: &SystemConfig<T>, k: usize) -> Result<Sinr<T>> {
    check_index("non-FL user", k, ch.nfl_users())?;
    let (s2, beta) = (ch.sigma2_3[k], ch.beta_nfl[k]);
    Ok(Sinr {
        num: cfg.rho_d * a.zeta_3[k] * gain(cfg.antennas, cfg.nfl_users) * s2,
        den: T::one() + cfg.rho_d * (beta - s2) * sum_of(&a.zeta_3),
    })
}

/// Pilot-overhead and bandwidth factor in bit/s per unit of `log2(1+SINR)`.
pub fn prelog<T: Scalar>(tau_pilot: usize, cfg: &SystemConfig<T>, half_band: bool) -> T {
    let frac = T::from_usize_lossy(cfg.coherence_len - tau_pilot.min(cfg.coherence_len))
        / T::from_usize_lossy(cfg.coherence_len);
    let band = if half_band { cfg.bandwidth_hz / T::lit(2.0) } else { cfg.bandwidth_hz };
    frac * band
}

/// Achievable rate in bit/s for SINR `gamma`.
pub fn rate_from_sinr<T: Scalar>(gamma: T, tau_pilot: usize, cfg: &SystemConfig<T>, half_band: bool) -> T {
    prelog(tau_pilot, cfg, half_band) * (T::one() + gamma).log2()
}

/// Durations of the three phases of one round, seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTimes<T> {
    pub t_d: T,
    pub t_c: T,
    pub t_u: T,
}

impl<T: Scalar> PhaseTimes<T> {
    pub fn total(&self) -> T {
        self.t_d + self.t_c + self.t_u
    }

    pub fn is_bounded(&self) -> bool {
        self.total().is_finite()
    }
}

struct PhaseRates<T> {
    r_d_fl: Vec<T>,
    r_1: Vec<T>,
    r_2: Vec<T>,
    r_u_fl: Vec<T>,
    r_3: Vec<T>,
}

fn phase_rates<T: Scalar>(a: &Allocation<T>, ch: &ChannelState<T>, cfg: &SystemConfig<T>) -> Result<PhaseRates<T>> {
    let (l, k) = (ch.fl_users(), ch.nfl_users());
    if a.fl_users() != l || a.nfl_users() != k || a.zeta_2.len() != k || a.zeta_3.len() != k || a.eta_u.len() != l {
        return Err(Error::Domain("allocation dimensions do not match the channel".into()));
    }
    let rate = |s: Sinr<T>, tau, half| rate_from_sinr(s.ratio(), tau, cfg, half);
    Ok(PhaseRates {
        r_d_fl: (0..l).map(|i| Ok(rate(sinr_s1_fl(a, ch, cfg, i)?, cfg.pilot_s1_fl, false))).collect::<Result<_>>()?,
        r_1: (0..k).map(|i| Ok(rate(sinr_s1_nfl(a, ch, cfg, i)?, cfg.pilot_s1_nfl, false))).collect::<Result<_>>()?,
        r_2: (0..k).map(|i| Ok(rate(sinr_s2(a, ch, cfg, i)?, cfg.pilot_s2, false))).collect::<Result<_>>()?,
        r_u_fl: (0..l).map(|i| Ok(rate(sinr_s3_ul(a, ch, cfg, i)?, cfg.pilot_s3_fl, true))).collect::<Result<_>>()?,
        r_3: (0..k).map(|i| Ok(rate(sinr_s3_dl(a, ch, cfg, i)?, cfg.pilot_s3_nfl, true))).collect::<Result<_>>()?,
    })
}

fn times_from<T: Scalar>(r_d: T, r_u: T, f: T, cfg: &SystemConfig<T>) -> PhaseTimes<T> {
    let div = |num: T, den: T| if den > T::zero() { num / den } else { T::infinity() };
    PhaseTimes {
        t_d: div(cfg.global_update_bits, r_d),
        t_c: div(cfg.compute_cycles(), f),
        t_u: div(cfg.local_update_bits, r_u),
    }
}

/// Phase durations; a zero group rate or zero frequency yields an infinite delay.
pub fn phase_times<T: Scalar>(a: &Allocation<T>, ch: &ChannelState<T>, cfg: &SystemConfig<T>) -> Result<PhaseTimes<T>> {
    let r = phase_rates(a, ch, cfg)?;
    Ok(times_from(min_of(&r.r_d_fl), min_of(&r.r_u_fl), a.f, cfg))
}

/// Every rate, delay and data volume of one allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport<T> {
    pub r_d_fl: Vec<T>,
    pub r_d_group: T,
    pub r_1: Vec<T>,
    pub r_2: Vec<T>,
    pub r_u_fl: Vec<T>,
    pub r_u_group: T,
    pub r_3: Vec<T>,
    pub t_d: T,
    pub t_c: T,
    pub t_u: T,
    pub d_1: Vec<T>,
    pub d_2: Vec<T>,
    pub d_3: Vec<T>,
    pub eff_rate: Vec<T>,
    pub min_eff_rate: T,
}

impl<T: Scalar> RateReport<T> {
    pub fn round_time(&self) -> T {
        self.t_d + self.t_c + self.t_u
    }

    /// Column names for [`RateReport::csv_row`] with `l` FL and `k` non-FL users.
    ///
    /// Order: `min_eff_rate, t_d, t_c, t_u, r_d_group, r_u_group`, then per-user
    /// blocks `r_d_fl_*`, `r_u_fl_*`, `r_1_*`, `r_2_*`, `r_3_*`, `d_1_*`, `d_2_*`,
    /// `d_3_*`, `eff_rate_*`. Rates bit/s, times s, volumes bits.
    pub fn csv_header(l: usize, k: usize) -> Vec<String> {
        let mut h: Vec<String> = ["min_eff_rate", "t_d", "t_c", "t_u", "r_d_group", "r_u_group"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for (name, n) in [("r_d_fl", l), ("r_u_fl", l)] {
            h.extend((0..n).map(|i| format!("{name}_{i}")));
        }
        for name in ["r_1", "r_2", "r_3", "d_1", "d_2", "d_3", "eff_rate"] {
            h.extend((0..k).map(|i| format!("{name}_{i}")));
        }
        h
    }

    pub fn csv_row(&self) -> Vec<String> {
        let mut row: Vec<T> = vec![self.min_eff_rate, self.t_d, self.t_c, self.t_u, self.r_d_group, self.r_u_group];
        for v in [&self.r_d_fl, &self.r_u_fl, &self.r_1, &self.r_2, &self.r_3, &self.d_1, &self.d_2, &self.d_3, &self.eff_rate] {
            row.extend(v.iter().copied());
        }
        row.into_iter().map(|x| format!("{x:e}")).collect()
    }
}

/// Evaluates the allocation. If the round never completes (a zero group
/// rate or zero frequency) every effective rate is reported as zero.
pub fn evaluate<T: Scalar>(a: &Allocation<T>, ch: &ChannelState<T>, cfg: &SystemConfig<T>) -> Result<RateReport<T>> {
    let r = phase_rates(a, ch, cfg)?;
    let (r_d_group, r_u_group) = (min_of(&r.r_d_fl), min_of(&r.r_u_fl));
    let times = times_from(r_d_group, r_u_group, a.f, cfg);
    let total = times.total();
    let scale = |rates: &[T], t: T| -> Vec<T> { rates.iter().map(|&x| x * t).collect() };
    let d_1 = scale(&r.r_1, times.t_d);
    let d_2 = scale(&r.r_2, times.t_c);
    let d_3 = scale(&r.r_3, times.t_u);
    let eff_rate: Vec<T> = if total.is_finite() {
        (0..r.r_1.len()).map(|k| (d_1[k] + d_2[k] + d_3[k]) / total).collect()
    } else {
        vec![T::zero(); r.r_1.len()]
    };
    Ok(RateReport {
        min_eff_rate: min_of(&eff_rate),
        r_d_group,
        r_u_group,
        r_d_fl: r.r_d_fl,
        r_1: r.r_1,
        r_2: r.r_2,
        r_u_fl: r.r_u_fl,
        r_3: r.r_3,
        t_d: times.t_d,
        t_c: times.t_c,
        t_u: times.t_u,
        d_1,
        d_2,
        d_3,
        eff_rate,
    })
}

/// Constraints of the power/frequency allocation problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintId {
    /// Total S1 downlink power budget.
    S1PowerBudget,
    /// Total S2 downlink power budget.
    S2PowerBudget,
    /// Per-user S3 uplink power limit.
    UplinkPowerLimit(usize),
    /// Total S3 downlink power budget.
    S3PowerBudget,
    /// A negative power coefficient.
    NonNegative,
    /// Frequency outside `(f_min, f_max]`.
    FrequencyRange,
    /// Round duration above the QoS threshold.
    RoundDeadline,
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::S1PowerBudget => write!(f, "s1_power_budget"),
            Self::S2PowerBudget => write!(f, "s2_power_budget"),
            Self::UplinkPowerLimit(l) => write!(f, "uplink_power_limit[{l}]"),
            Self::S3PowerBudget => write!(f, "s3_power_budget"),
            Self::NonNegative => write!(f, "non_negative"),
            Self::FrequencyRange => write!(f, "frequency_range"),
            Self::RoundDeadline => write!(f, "round_deadline"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation<T> {
    pub constraint: ConstraintId,
    /// Amount by which the constraint is exceeded (same units as the constraint).
    pub residual: T,
}

/// Relative slack granted to floating-point roundoff in [`check_feasibility`].
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Lists every violated constraint; empty iff the allocation is feasible.
pub fn check_feasibility<T: Scalar>(a: &Allocation<T>, ch: &ChannelState<T>, cfg: &SystemConfig<T>) -> Result<Vec<Violation<T>>> {
    check_feasibility_tol(a, ch, cfg, T::lit(FEASIBILITY_TOL))
}

pub fn check_feasibility_tol<T: Scalar>(
    a: &Allocation<T>,
    ch: &ChannelState<T>,
    cfg: &SystemConfig<T>,
    tol: T,
) -> Result<Vec<Violation<T>>> {
    let mut out = Vec::new();
    let mut over = |constraint, value: T, limit: T| {
        let residual = value - limit;
        if residual > tol * limit.abs().max(T::one()) {
            out.push(Violation { constraint, residual });
        }
    };
    over(ConstraintId::S1PowerBudget, sum_of(&a.eta_d) + sum_of(&a.zeta_1), T::one());
    over(ConstraintId::S2PowerBudget, sum_of(&a.zeta_2), T::one());
    for (l, &e) in a.eta_u.iter().enumerate() {
        over(ConstraintId::UplinkPowerLimit(l), e, T::one());
    }
    over(ConstraintId::S3PowerBudget, sum_of(&a.zeta_3), T::one());
    let most_negative = [&a.eta_d, &a.zeta_1, &a.zeta_2, &a.eta_u, &a.zeta_3]
        .iter()
        .flat_map(|v| v.iter().copied())
        .fold(T::zero(), T::min);
    if most_negative < T::zero() {
        out.push(Violation { constraint: ConstraintId::NonNegative, residual: -most_negative });
    }
    if a.f > cfg.f_max * (T::one() + tol) {
        out.push(Violation { constraint: ConstraintId::FrequencyRange, residual: a.f - cfg.f_max });
    } else if !(a.f > cfg.f_min) {
        out.push(Violation { constraint: ConstraintId::FrequencyRange, residual: cfg.f_min - a.f });
    }
    let report = evaluate(a, ch, cfg)?;
    let total = report.round_time();
    if total > cfg.t_qos * (T::one() + tol) {
        out.push(Violation { constraint: ConstraintId::RoundDeadline, residual: total - cfg.t_qos });
    }
    Ok(out)
}
