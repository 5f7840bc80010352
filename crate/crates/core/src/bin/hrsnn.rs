use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hrsnn::experiment::commands::{self, SweepAxis};
use hrsnn::experiment::ExperimentConfig;
use hrsnn::Error;

// stdout writes ignore errors so a closed pipe is not a panic
macro_rules! sayln {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = write!(std::io::stdout(), $($arg)*);
    }};
}

/// Environment variable that overrides the output directory.
const OUT_ENV: &str = "HRSNN_OUT_DIR";

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "hrsnn",
    version,
    about = "Heterogeneous recurrent spiking reservoir experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Config file (`section.key = value` lines); defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `HRSNN_OUT_DIR` and `run.out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Extra `section.key=value` overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and encode the synthetic dataset.
    GenData(Common),
    /// Run every heterogeneity variant over several seeds.
    Ablation(Common),
    /// Sweep reservoir size, lambda x w_scale, or training fraction.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// neurons | lambda_wscale | train_fraction
        #[arg(long, default_value = "neurons")]
        axis: String,
    },
    /// Bayesian optimization of the reservoir hyperparameters.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Overrides `bo.budget`.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Render plots and a summary for an output directory.
    Report {
        #[command(flatten)]
        common: Common,
        /// Run directory (defaults to the output directory).
        dir: Option<PathBuf>,
    },
    /// Quick numerical self-checks; exits with status 4 on failure.
    Selftest(Common),
    /// Print the effective configuration.
    Config(Common),
}

enum Failure {
    Config(String),
    Runtime(String),
    Acceptance(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    cfg.validate()?;
    let out = common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(&cfg.run.out_dir));
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok((cfg, out))
}

fn save_config(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out).map_err(|e| Failure::Runtime(e.to_string()))?;
    std::fs::write(out.join("config.cfg"), cfg.to_text()).map_err(|e| Failure::Runtime(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenData(c) => {
            let (cfg, out) = load(&c)?;
            save_config(&cfg, &out)?;
            sayln!("{}", commands::cmd_gen_data(&cfg, &out)?);
        }
        Command::Ablation(c) => {
            let (cfg, out) = load(&c)?;
            save_config(&cfg, &out)?;
            for s in commands::cmd_ablation(&cfg, &out)? {
                sayln!(
                    "{:<7} accuracy {:.4} +- {:.4}  activation {:.4}  active {:.1}  ac_ops {:.0}  rank {:.2}",
                    s.variant.as_str(),
                    s.acc_mean,
                    s.acc_sd,
                    s.nu_mean,
                    s.active_mean,
                    s.ac_ops_mean,
                    s.rank_mean
                );
            }
        }
        Command::Sweep { common, axis } => {
            let axis: SweepAxis = axis.parse().map_err(|e: Error| Failure::Config(e.to_string()))?;
            let (cfg, out) = load(&common)?;
            save_config(&cfg, &out)?;
            say!("{}", commands::cmd_sweep(&cfg, axis, &out)?);
        }
        Command::Optimize { common, budget } => {
            let (mut cfg, out) = load(&common)?;
            if let Some(b) = budget {
                cfg.set("bo.budget", &b.to_string())?;
                cfg.validate()?;
            }
            save_config(&cfg, &out)?;
            let r = commands::cmd_optimize(&cfg, &out)?;
            sayln!("best score {:.4}", r.best_score);
            sayln!("{}", r.best.to_blob());
        }
        Command::Report { common, dir } => {
            let (_, out) = load(&common)?;
            let dir = dir.unwrap_or(out);
            say!("{}", commands::cmd_report(&dir)?);
        }
        Command::Selftest(c) => {
            let (_, out) = load(&c)?;
            let checks = commands::cmd_selftest(&out)?;
            let mut failed = Vec::new();
            for (name, ok) in &checks {
                sayln!("[{}] {name}", if *ok { "PASS" } else { "FAIL" });
                if !ok {
                    failed.push(*name);
                }
            }
            if !failed.is_empty() {
                return Err(Failure::Acceptance(format!("failed checks: {}", failed.join(", "))));
            }
        }
        Command::Config(c) => {
            let (cfg, _) = load(&c)?;
            say!("{}", cfg.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Acceptance(m)) => {
            eprintln!("{m}");
            ExitCode::from(EXIT_ACCEPTANCE)
        }
    }
}
