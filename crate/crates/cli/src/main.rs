use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sgld_cli::commands::calibrate::{cmd_calibrate, CalibrateTarget};
use sgld_cli::commands::verify::{cmd_verify, Suite};
use sgld_cli::commands::{account::cmd_account, bench::cmd_bench, train::cmd_train, Method};
use sgld_cli::config::{ResolvedData, ResolvedRun, RunConfigFile};
use sgld_cli::error::CliError;

/// Differentially private training, accounting, calibration and
/// verification for smooth strongly convex objectives.
#[derive(Parser)]
#[command(name = "sgld", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one method and emit report.json, metrics.csv, epsilon_curve.csv.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Sgld)]
        method: Method,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config snapshot stride (0 disables snapshots).
        #[arg(long)]
        snapshot_stride: Option<usize>,
    },
    /// Tabulate the privacy bounds against the iteration count.
    Account {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        k_max: usize,
        /// Number of K values in the table.
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// Fixed Rényi order; defaults to the calibrated or optimized one.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a privacy target for (sigma^2, K, alpha), fixed and decreasing.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        /// (epsilon, delta) target.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// (alpha, eps-rdp) target.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        eps_rdp: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification suites; exit code 1 on any failed assertion.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        /// Seeds per Monte-Carlo utility measurement.
        #[arg(long, default_value_t = 200)]
        seeds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare dp-sgld, dp-sgd and no-dp over the configured datasets.
    Bench {
        /// One or more run configs; each contributes its dataset/schedule.
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        /// Seeds per (method, dataset) cell.
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run() -> Result<bool, CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train {
            config,
            method,
            out,
            seed,
            snapshot_stride,
        } => {
            let mut cfg = RunConfigFile::from_path(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(stride) = snapshot_stride {
                cfg.snapshot_stride = stride;
            }
            let out_dir = out.or_else(|| cfg.output_dir.clone().map(PathBuf::from));
            let run = ResolvedRun::load(cfg)?;
            let bundle = cmd_train(&run, method, out_dir.as_deref())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&bundle).map_err(CliError::from)?
            );
            Ok(true)
        }
        Command::Account {
            config,
            k_max,
            points,
            alpha,
            out,
        } => {
            let cfg = RunConfigFile::from_path(&config)?;
            let run = ResolvedRun::load(cfg)?;
            let output = cmd_account(&run, k_max, points, alpha, out.as_deref())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&output).map_err(CliError::from)?
            );
            Ok(true)
        }
        Command::Calibrate {
            config,
            epsilon,
            delta,
            alpha,
            eps_rdp,
            out,
        } => {
            let cfg = RunConfigFile::from_path(&config)?;
            let data = ResolvedData::load(cfg)?;
            let target = match (epsilon, delta, alpha, eps_rdp) {
                (Some(e), Some(d), None, None) => CalibrateTarget::Dp {
                    epsilon: e,
                    delta: d,
                },
                (None, None, Some(a), Some(e)) => CalibrateTarget::Rdp {
                    alpha: a,
                    eps_rdp: e,
                },
                _ => {
                    return Err(CliError::Config(
                        "pass either --epsilon with --delta, or --alpha with --eps-rdp".into(),
                    ))
                }
            };
            cmd_calibrate(&data, target, out.as_deref())?;
            Ok(true)
        }
        Command::Verify { suite, seeds, out } => {
            let verdict = cmd_verify(suite, seeds, out.as_deref())?;
            Ok(verdict.pass)
        }
        Command::Bench { config, seeds, out } => {
            let mut runs = Vec::new();
            for path in &config {
                runs.push(ResolvedRun::load(RunConfigFile::from_path(path)?)?);
            }
            cmd_bench(&runs, seeds, out.as_deref())?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
