use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fedmimo::harness::{self, SweepVar};
use fedmimo::oracle::GridSpec;
use fedmimo::{Error, ScaOptions, ScaStatus, SystemConfig64};

const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(name = "fedmimo", version, about = "Power and CPU-frequency allocation for FL over massive MIMO")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one channel draw with Algorithm 1.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also emit the per-iteration trace.
        #[arg(long)]
        trace: bool,
        /// Write solve.csv (and trace.csv) here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo sweep of Algorithm 1 against the baseline.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        var: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid-search oracle against Algorithm 1 on a tiny instance.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 15)]
        steps: usize,
        #[arg(long, default_value_t = 3)]
        rounds: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Cmd) -> Result<ExitCode, Error> {
    let opts = ScaOptions::default();
    match cmd {
        Cmd::Solve { config, seed, trace, out } => {
            let cfg = SystemConfig64::load(&config)?;
            let r = harness::solve_instance(&cfg, seed, &opts)?;
            let report = harness::solve_csv(&r.sca);
            let trace_text = trace.then(|| harness::trace_csv(&r.sca));
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    fs::write(dir.join("solve.csv"), report)?;
                    if let Some(t) = trace_text {
                        fs::write(dir.join("trace.csv"), t)?;
                    }
                }
                None => {
                    print!("{report}");
                    if let Some(t) = trace_text {
                        print!("\n{t}");
                    }
                }
            }
            Ok(match r.sca.status {
                ScaStatus::Converged | ScaStatus::MaxIter => ExitCode::SUCCESS,
                ScaStatus::InfeasibleInstance => {
                    eprintln!("infeasible-instance: the deadline cannot be met");
                    ExitCode::from(EXIT_INFEASIBLE)
                }
                ScaStatus::SolverFailure => {
                    eprintln!("error: subproblem solver failed");
                    ExitCode::FAILURE
                }
            })
        }
        Cmd::Sweep { config, var, values, trials, seed, out } => {
            let cfg = SystemConfig64::load(&config)?;
            let var: SweepVar = var.parse()?;
            let res = harness::sweep(&cfg, var, &values, trials, seed, &opts)?;
            let (t, s) = res.write(&out)?;
            eprintln!("wrote {} and {}", t.display(), s.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Oracle { config, seed, steps, rounds } => {
            let cfg = SystemConfig64::load(&config)?;
            let cmp = harness::compare_oracle(&cfg, seed, GridSpec { steps, rounds }, &opts)?;
            print!("{}", cmp.csv());
            Ok(if cmp.oracle.allocation.is_none() { ExitCode::from(EXIT_INFEASIBLE) } else { ExitCode::SUCCESS })
        }
    }
}
