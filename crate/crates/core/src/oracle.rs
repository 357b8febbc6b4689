//! Exhaustive grid search over the allocation space for toy instances.
//!
//! Rates of each phase depend only on that phase's coefficients, so the
//! grid is enumerated per phase first and the phases are then combined.
//! Each refinement round re-grids a neighbourhood of the incumbent.

use crate::error::{Error, Result};
use crate::num::{min_of, Scalar};
use crate::rates::{
    check_feasibility, evaluate, rate_from_sinr, sinr_s1_fl, sinr_s1_nfl, sinr_s2, sinr_s3_dl, sinr_s3_ul, Allocation,
};
use crate::sysmodel::{ChannelState, SystemConfig};

/// Largest number of free variables the oracle accepts.
pub const MAX_FREE_VARIABLES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    /// Points per axis.
    pub steps: usize,
    /// Refinement rounds after the initial grid.
    pub rounds: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { steps: 15, rounds: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<T> {
    /// `None` when no grid point is feasible.
    pub allocation: Option<Allocation<T>>,
    /// Best min effective rate, bit/s (0 if infeasible).
    pub objective: T,
    /// Incumbent objective after the initial grid and after each refinement.
    pub round_objectives: Vec<T>,
    pub evaluated: u64,
}

/// Power axis on `(0, 1]`: a third of the points log-spaced in `[1e-3, 0.1)`,
/// the rest linear in `[0.1, 1]`.
fn power_axis<T: Scalar>(steps: usize) -> Vec<T> {
    let n_log = (steps / 3).max(1);
    let n_lin = steps.saturating_sub(n_log).max(2);
    let mut v: Vec<T> = (0..n_log)
        .map(|i| T::lit(10f64.powf(-3.0 + 2.0 * i as f64 / n_log as f64)))
        .collect();
    v.extend(linspace(T::lit(0.1), T::one(), n_lin));
    v
}

fn linspace<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n <= 1 {
        return vec![lo];
    }
    let step = (hi - lo) / T::from_usize_lossy(n - 1);
    (0..n).map(|i| lo + step * T::from_usize_lossy(i)).collect()
}

fn logspace<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    linspace(lo.ln(), hi.ln(), n).into_iter().map(T::exp).collect()
}

/// Neighbourhood of `axis[i]` re-gridded with `n` points, incumbent included.
fn refine_axis<T: Scalar>(axis: &[T], i: usize, n: usize) -> Vec<T> {
    let v = axis[i];
    let lo = if i > 0 { axis[i - 1] } else { v };
    let hi = if i + 1 < axis.len() { axis[i + 1] } else { v };
    let mut out = linspace(lo, hi, n);
    out.push(v);
    out.retain(|x| *x > T::zero());
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    out.dedup();
    out
}

/// Cartesian product of `axes` as index tuples, first axis slowest.
fn product(axes: &[&Vec<impl Copy>]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..axis.len()).map(move |j| {
                    let mut p = prefix.clone();
                    p.push(j);
                    p
                })
            })
            .collect();
    }
    out
}

struct Combo<T> {
    idx: Vec<usize>,
    vals: Vec<T>,
}

fn combos<T: Scalar>(axes: &[Vec<T>], budget: Option<T>) -> Vec<Combo<T>> {
    let refs: Vec<&Vec<T>> = axes.iter().collect();
    product(&refs)
        .into_iter()
        .map(|idx| {
            let vals = idx.iter().zip(axes).map(|(&j, a)| a[j]).collect::<Vec<T>>();
            Combo { idx, vals }
        })
        .filter(|c| budget.is_none_or(|b| c.vals.iter().fold(T::zero(), |s, &v| s + v) <= b))
        .collect()
}

/// Variable order: `eta_d[L] zeta_1[K] zeta_2[K] eta_u[L] zeta_3[K] f`.
fn allocation_from<T: Scalar>(vals: &[T], l: usize, k: usize) -> Allocation<T> {
    let mut it = vals.iter().copied();
    let mut take = |n: usize| (0..n).map(|_| it.next().expect("value")).collect::<Vec<T>>();
    let eta_d = take(l);
    let zeta_1 = take(k);
    let zeta_2 = take(k);
    let eta_u = take(l);
    let zeta_3 = take(k);
    let f = take(1)[0];
    Allocation { eta_d, zeta_1, zeta_2, eta_u, zeta_3, f }
}

/// Brute-force maximizer of the min effective rate over a refined grid.
pub fn grid_search<T: Scalar>(ch: &ChannelState<T>, cfg: &SystemConfig<T>, grid: GridSpec) -> Result<OracleResult<T>> {
    cfg.validate()?;
    let (l, k) = (cfg.fl_users, cfg.nfl_users);
    let dims = 2 * l + 3 * k + 1;
    if dims > MAX_FREE_VARIABLES {
        return Err(Error::OracleDimension(dims));
    }
    let steps = grid.steps.max(3);
    let f_lo = if cfg.f_min > T::zero() { cfg.f_min } else { cfg.compute_cycles() / cfg.t_qos };
    let mut axes: Vec<Vec<T>> = (0..dims - 1).map(|_| power_axis(steps)).collect();
    axes.push(logspace(f_lo.min(cfg.f_max), cfg.f_max, steps));

    let mut best: Option<(T, Vec<usize>)> = None;
    let mut round_objectives = Vec::new();
    let mut evaluated = 0u64;
    for round in 0..=grid.rounds {
        if round > 0 {
            let Some((_, idx)) = &best else { break };
            axes = axes.iter().zip(idx).map(|(a, &i)| refine_axis(a, i, steps)).collect();
            best = None;
        }
        let (found, count) = search_round(ch, cfg, &axes)?;
        evaluated += count;
        if let Some((obj, idx)) = found {
            best = Some((obj, idx));
        }
        round_objectives.push(best.as_ref().map_or(T::zero(), |b| b.0));
    }

    let Some((_, idx)) = best else {
        return Ok(OracleResult { allocation: None, objective: T::zero(), round_objectives, evaluated });
    };
    let vals: Vec<T> = idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
    let allocation = allocation_from(&vals, l, k);
    let objective = evaluate(&allocation, ch, cfg)?.min_eff_rate;
    debug_assert!(check_feasibility(&allocation, ch, cfg)?.is_empty());
    Ok(OracleResult { allocation: Some(allocation), objective, round_objectives, evaluated })
}

/// One full pass over `axes`. Returns the best `(objective, index tuple)`;
/// ties keep the lexicographically first tuple.
#[allow(clippy::type_complexity)]
fn search_round<T: Scalar>(
    ch: &ChannelState<T>,
    cfg: &SystemConfig<T>,
    axes: &[Vec<T>],
) -> Result<(Option<(T, Vec<usize>)>, u64)> {
    let (l, k) = (cfg.fl_users, cfg.nfl_users);
    let one = T::one();
    let o_z2 = l + k;
    let o_eu = l + 2 * k;
    let o_z3 = 2 * l + 2 * k;
    let o_f = 2 * l + 3 * k;
    let mut probe = Allocation::uniform(l, k, T::lit(0.1), cfg.f_max);

    // Broadcast phase: FL group rate and non-FL rates.
    let s1 = combos(&axes[..o_z2], Some(one));
    let mut s1_rates = Vec::with_capacity(s1.len());
    for c in &s1 {
        probe.eta_d.copy_from_slice(&c.vals[..l]);
        probe.zeta_1.copy_from_slice(&c.vals[l..]);
        let rd = (0..l)
            .map(|i| Ok(rate_from_sinr(sinr_s1_fl(&probe, ch, cfg, i)?.ratio(), cfg.pilot_s1_fl, cfg, false)))
            .collect::<Result<Vec<T>>>()?;
        let r1 = (0..k)
            .map(|j| Ok(rate_from_sinr(sinr_s1_nfl(&probe, ch, cfg, j)?.ratio(), cfg.pilot_s1_nfl, cfg, false)))
            .collect::<Result<Vec<T>>>()?;
        s1_rates.push((min_of(&rd), r1));
    }
    let s2 = combos(&axes[o_z2..o_eu], Some(one));
    let mut s2_rates = Vec::with_capacity(s2.len());
    for c in &s2 {
        probe.zeta_2.copy_from_slice(&c.vals);
        s2_rates.push(
            (0..k)
                .map(|j| Ok(rate_from_sinr(sinr_s2(&probe, ch, cfg, j)?.ratio(), cfg.pilot_s2, cfg, false)))
                .collect::<Result<Vec<T>>>()?,
        );
    }
    let up = combos(&axes[o_eu..o_z3], None);
    let mut up_rates = Vec::with_capacity(up.len());
    for c in &up {
        probe.eta_u.copy_from_slice(&c.vals);
        let ru = (0..l)
            .map(|i| Ok(rate_from_sinr(sinr_s3_ul(&probe, ch, cfg, i)?.ratio(), cfg.pilot_s3_fl, cfg, true)))
            .collect::<Result<Vec<T>>>()?;
        up_rates.push(min_of(&ru));
    }
    let s3 = combos(&axes[o_z3..o_f], Some(one));
    let mut s3_rates = Vec::with_capacity(s3.len());
    for c in &s3 {
        probe.zeta_3.copy_from_slice(&c.vals);
        s3_rates.push(
            (0..k)
                .map(|j| Ok(rate_from_sinr(sinr_s3_dl(&probe, ch, cfg, j)?.ratio(), cfg.pilot_s3_nfl, cfg, true)))
                .collect::<Result<Vec<T>>>()?,
        );
    }
    let t_c: Vec<T> = axes[o_f].iter().map(|&f| cfg.compute_time(f)).collect();

    let mut best: Option<(T, [usize; 5])> = None;
    let mut count = 0u64;
    for (i1, (rd, r1)) in s1_rates.iter().enumerate() {
        if !(*rd > T::zero()) {
            continue;
        }
        let t_d = cfg.global_update_bits / *rd;
        for (iu, &ru) in up_rates.iter().enumerate() {
            if !(ru > T::zero()) {
                continue;
            }
            let t_u = cfg.local_update_bits / ru;
            for (i_f, &tc) in t_c.iter().enumerate() {
                let total = t_d + tc + t_u;
                count += (s2_rates.len() * s3_rates.len()) as u64;
                if total > cfg.t_qos {
                    continue;
                }
                for (i2, r2) in s2_rates.iter().enumerate() {
                    for (i3, r3) in s3_rates.iter().enumerate() {
                        let obj = (0..k)
                            .map(|j| (r1[j] * t_d + r2[j] * tc + r3[j] * t_u) / total)
                            .fold(T::infinity(), T::min);
                        if best.as_ref().is_none_or(|b| obj > b.0) {
                            best = Some((obj, [i1, i2, iu, i3, i_f]));
                        }
                    }
                }
            }
        }
    }
    let Some((obj, [i1, i2, iu, i3, i_f])) = best else {
        return Ok((None, count));
    };
    let mut idx = Vec::with_capacity(o_f + 1);
    idx.extend_from_slice(&s1[i1].idx);
    idx.extend_from_slice(&s2[i2].idx);
    idx.extend_from_slice(&up[iu].idx);
    idx.extend_from_slice(&s3[i3].idx);
    idx.push(i_f);
    Ok((Some((obj, idx)), count))
}
