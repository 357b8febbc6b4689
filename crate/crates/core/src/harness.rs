//! Seeded experiment runs: single instances, parameter sweeps and oracle
//! comparisons, with CSV output.
//!
//! Trial `i` of a sweep uses channel seed `seed + i` for every sweep value,
//! and Algorithm 1 and the baseline always see the same draw.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::baseline::bl_allocation;
use crate::error::{ConfigIssue, Error, Result};
use crate::num::Scalar;
use crate::oracle::{grid_search, GridSpec, OracleResult};
use crate::rates::{evaluate, RateReport};
use crate::sca::{self, ScaOptions, ScaStatus, SolveReport};
use crate::sysmodel::{sample_layout, SystemConfig};

/// Sweepable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    /// Number of BS antennas.
    M,
    /// Number of FL users.
    L,
    /// Side of the square service area, metres.
    D,
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" => Ok(Self::M),
            "L" => Ok(Self::L),
            "D" | "D_side" => Ok(Self::D),
            _ => Err(Error::Config(vec![ConfigIssue::new("var", format!("unknown sweep variable `{s}`, expected M, L or D"))])),
        }
    }
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            Self::M => "M",
            Self::L => "L",
            Self::D => "D_side",
        }
    }

    /// Copy of `cfg` with this variable set to `value`.
    pub fn apply<T: Scalar>(self, cfg: &SystemConfig<T>, value: f64) -> Result<SystemConfig<T>> {
        let mut out = cfg.clone();
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(vec![ConfigIssue::new(self.name(), format!("{value} is not a non-negative integer"))]))
            }
        };
        match self {
            Self::M => out.antennas = count()?,
            Self::L => out.set_fl_users(count()?),
            Self::D => out.area_side = T::lit(value),
        }
        out.validate()?;
        Ok(out)
    }
}

/// Algorithm 1 and the baseline on one channel draw.
#[derive(Debug, Clone)]
pub struct InstanceResult<T> {
    pub seed: u64,
    pub sca: SolveReport<T>,
    /// `None` when the baseline cannot meet the deadline.
    pub baseline: Option<RateReport<T>>,
}

pub fn solve_instance<T: Scalar>(cfg: &SystemConfig<T>, seed: u64, opts: &ScaOptions) -> Result<InstanceResult<T>> {
    let ch = sample_layout(cfg, seed)?;
    let sca = sca::run(&ch, cfg, opts)?;
    let baseline = match bl_allocation(&ch, cfg)? {
        Some(a) => Some(evaluate(&a, &ch, cfg)?),
        None => None,
    };
    Ok(InstanceResult { seed, sca, baseline })
}

/// One trial of a sweep. Rates are in bit/s and 0 when infeasible.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub value: f64,
    pub trial: usize,
    pub seed: u64,
    pub alg1: f64,
    pub bl: f64,
    pub bl_feasible: bool,
    pub iterations: usize,
    pub status: ScaStatus,
}

impl TrialRow {
    pub const CSV_HEADER: &'static str = "value,trial,seed,min_eff_rate_alg1_bps,min_eff_rate_bl_bps,bl_feasible,iterations,status";

    /// Whether both methods produced a feasible allocation.
    pub fn paired_feasible(&self) -> bool {
        self.bl_feasible && self.status != ScaStatus::InfeasibleInstance && self.status != ScaStatus::SolverFailure
    }

    fn csv(&self) -> String {
        format!(
            "{},{},{},{:.9e},{:.9e},{},{},{}",
            fmt_value(self.value),
            self.trial,
            self.seed,
            self.alg1,
            self.bl,
            self.bl_feasible,
            self.iterations,
            self.status
        )
    }
}

/// Means over the trials where both methods are feasible.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub value: f64,
    pub trials: usize,
    pub included: usize,
    pub excluded: usize,
    pub alg1_mean: f64,
    pub alg1_std: f64,
    pub bl_mean: f64,
    pub bl_std: f64,
}

impl SummaryRow {
    pub const CSV_HEADER: &'static str =
        "value,trials,included,excluded,alg1_mean_bps,alg1_std_bps,bl_mean_bps,bl_std_bps";

    fn from_trials(value: f64, rows: &[TrialRow]) -> Self {
        let kept: Vec<&TrialRow> = rows.iter().filter(|r| r.paired_feasible()).collect();
        let (alg1_mean, alg1_std) = mean_std(kept.iter().map(|r| r.alg1));
        let (bl_mean, bl_std) = mean_std(kept.iter().map(|r| r.bl));
        Self {
            value,
            trials: rows.len(),
            included: kept.len(),
            excluded: rows.len() - kept.len(),
            alg1_mean,
            alg1_std,
            bl_mean,
            bl_std,
        }
    }

    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{:.9e},{:.9e},{:.9e},{:.9e}",
            fmt_value(self.value),
            self.trials,
            self.included,
            self.excluded,
            self.alg1_mean,
            self.alg1_std,
            self.bl_mean,
            self.bl_std
        )
    }
}

/// Mean and sample standard deviation; `(0, 0)` for no samples.
fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn fmt_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub var: SweepVar,
    pub trials: Vec<TrialRow>,
    pub summary: Vec<SummaryRow>,
}

impl SweepResult {
    pub fn trials_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", TrialRow::CSV_HEADER);
        for r in &self.trials {
            let _ = writeln!(s, "{}", r.csv());
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", SummaryRow::CSV_HEADER);
        for r in &self.summary {
            let _ = writeln!(s, "{}", r.csv());
        }
        s
    }

    /// Writes `sweep_<var>_trials.csv` and `sweep_<var>_summary.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let trials = dir.join(format!("sweep_{}_trials.csv", self.var.name()));
        let summary = dir.join(format!("sweep_{}_summary.csv", self.var.name()));
        fs::write(&trials, self.trials_csv())?;
        fs::write(&summary, self.summary_csv())?;
        Ok((trials, summary))
    }

    pub fn summary_for(&self, value: f64) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.value == value)
    }
}

/// Runs `trials` draws per value, in parallel, reduced in trial order.
pub fn sweep<T: Scalar>(
    cfg: &SystemConfig<T>,
    var: SweepVar,
    values: &[f64],
    trials: usize,
    seed: u64,
    opts: &ScaOptions,
) -> Result<SweepResult> {
    let mut rows = Vec::with_capacity(values.len() * trials);
    let mut summary = Vec::with_capacity(values.len());
    for &value in values {
        let c = var.apply(cfg, value)?;
        let batch = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let s = seed.wrapping_add(trial as u64);
                let r = solve_instance(&c, s, opts)?;
                Ok(TrialRow {
                    value,
                    trial,
                    seed: s,
                    alg1: r.sca.min_eff_rate.as_f64(),
                    bl: r.baseline.as_ref().map_or(0.0, |b| b.min_eff_rate.as_f64()),
                    bl_feasible: r.baseline.is_some(),
                    iterations: r.sca.iterations,
                    status: r.sca.status,
                })
            })
            .collect::<Result<Vec<TrialRow>>>()?;
        summary.push(SummaryRow::from_trials(value, &batch));
        rows.extend(batch);
    }
    Ok(SweepResult { var, trials: rows, summary })
}

/// Grid oracle against Algorithm 1 on one draw.
#[derive(Debug, Clone)]
pub struct OracleComparison<T> {
    pub seed: u64,
    pub oracle: OracleResult<T>,
    pub sca: SolveReport<T>,
}

impl<T: Scalar> OracleComparison<T> {
    pub const CSV_HEADER: &'static str = "seed,oracle_bps,alg1_bps,relative_gap,oracle_status,alg1_status";

    /// `(oracle - alg1) / oracle`, 0 when the oracle finds nothing.
    pub fn relative_gap(&self) -> f64 {
        let o = self.oracle.objective.as_f64();
        if o > 0.0 {
            (o - self.sca.min_eff_rate.as_f64()) / o
        } else {
            0.0
        }
    }

    pub fn csv(&self) -> String {
        let o = if self.oracle.allocation.is_some() { "feasible" } else { "infeasible" };
        format!(
            "{}\n{},{:.9e},{:.9e},{:.9e},{},{}\n",
            Self::CSV_HEADER,
            self.seed,
            self.oracle.objective,
            self.sca.min_eff_rate,
            self.relative_gap(),
            o,
            self.sca.status
        )
    }
}

pub fn compare_oracle<T: Scalar>(
    cfg: &SystemConfig<T>,
    seed: u64,
    grid: GridSpec,
    opts: &ScaOptions,
) -> Result<OracleComparison<T>> {
    let ch = sample_layout(cfg, seed)?;
    let oracle = grid_search(&ch, cfg, grid)?;
    let sca = sca::run(&ch, cfg, opts)?;
    Ok(OracleComparison { seed, oracle, sca })
}

/// Single-run CSV: header plus one row.
pub fn solve_csv<T: Scalar>(r: &SolveReport<T>) -> String {
    format!("{}\n{}\n", SolveReport::<T>::CSV_HEADER.join(","), r.csv_row().join(","))
}

pub const TRACE_HEADER: &str = "iteration,z_bps,min_eff_rate_bps,newton_iters";

pub fn trace_csv<T: Scalar>(r: &SolveReport<T>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{TRACE_HEADER}");
    for t in &r.trace {
        let _ = writeln!(s, "{},{:.9e},{:.9e},{}", t.iteration, t.z, t.min_eff_rate, t.newton_iters);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SystemConfig<f64> {
        let mut cfg = SystemConfig::reference();
        cfg.antennas = 24;
        cfg.set_fl_users(2);
        cfg.nfl_users = 2;
        cfg
    }

    #[test]
    fn parses_sweep_var() {
        assert_eq!("M".parse::<SweepVar>().unwrap(), SweepVar::M);
        assert_eq!("D".parse::<SweepVar>().unwrap(), SweepVar::D);
        assert!("X".parse::<SweepVar>().is_err());
    }

    #[test]
    fn apply_rejects_fractional_counts() {
        let cfg = small();
        assert!(SweepVar::M.apply(&cfg, 20.5).is_err());
        assert_eq!(SweepVar::L.apply(&cfg, 3.0).unwrap().samples.len(), 3);
        assert_eq!(SweepVar::D.apply(&cfg, 125.0).unwrap().area_side, 125.0);
    }

    #[test]
    fn mean_std_small_cases() {
        assert_eq!(mean_std([].into_iter()), (0.0, 0.0));
        assert_eq!(mean_std([3.0].into_iter()), (3.0, 0.0));
        let (m, s) = mean_std([1.0, 2.0, 3.0, 4.0].into_iter());
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn summary_excludes_unpaired_trials() {
        let row = |alg1, bl, bl_feasible| TrialRow {
            value: 1.0,
            trial: 0,
            seed: 0,
            alg1,
            bl,
            bl_feasible,
            iterations: 1,
            status: ScaStatus::Converged,
        };
        let s = SummaryRow::from_trials(1.0, &[row(4.0, 2.0, true), row(6.0, 0.0, false), row(2.0, 1.0, true)]);
        assert_eq!((s.included, s.excluded), (2, 1));
        assert_eq!((s.alg1_mean, s.bl_mean), (3.0, 1.5));
    }

    #[test]
    fn sweep_pairs_seeds_and_is_repeatable() {
        let cfg = small();
        let opts = ScaOptions { max_iter: 3, ..ScaOptions::default() };
        let a = sweep(&cfg, SweepVar::M, &[16.0, 24.0], 2, 7, &opts).unwrap();
        let b = sweep(&cfg, SweepVar::M, &[16.0, 24.0], 2, 7, &opts).unwrap();
        assert_eq!(a.trials_csv(), b.trials_csv());
        assert_eq!(a.summary_csv(), b.summary_csv());
        let seeds: Vec<u64> = a.trials.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, vec![7, 8, 7, 8]);
        assert_eq!(a.trials_csv().lines().next().unwrap(), TrialRow::CSV_HEADER);
    }

    #[test]
    fn csv_headers_are_stable() {
        assert_eq!(
            TrialRow::CSV_HEADER,
            "value,trial,seed,min_eff_rate_alg1_bps,min_eff_rate_bl_bps,bl_feasible,iterations,status"
        );
        assert_eq!(SummaryRow::CSV_HEADER, "value,trials,included,excluded,alg1_mean_bps,alg1_std_bps,bl_mean_bps,bl_std_bps");
        assert_eq!(OracleComparison::<f64>::CSV_HEADER, "seed,oracle_bps,alg1_bps,relative_gap,oracle_status,alg1_status");
        assert_eq!(TRACE_HEADER, "iteration,z_bps,min_eff_rate_bps,newton_iters");
    }
}
