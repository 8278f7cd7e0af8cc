use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use floqctl::config::{ExperimentConfig, ExperimentKind, NuMax};
use floqctl::Failure;

/// Floquet pulse synthesis experiments.
#[derive(Debug, Parser)]
#[command(name = "floqctl", version)]
struct Cli {
    /// gate-min-time, tangle-plateau, chain-entangle or validate
    experiment: ExperimentKind,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sideband truncation, a number or `auto`.
    #[arg(long)]
    nu_max: Option<NuMax>,
}

/// Worker thread cap.
const THREADS_VAR: &str = "FLOQCTL_THREADS";

fn execute(cli: Cli) -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.parse().map_err(|_| Failure::Config(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if cfg.experiment != cli.experiment {
        return Err(Failure::Config(format!("{} is a {} config, not {}", cli.config.display(), cfg.experiment, cli.experiment)).into());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(nu) = cli.nu_max {
        cfg.nu_max = nu;
    }
    let out = cli.out.unwrap_or_else(|| cfg.output.dir.clone());
    floqctl::run(&cfg, &out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Failure>().map_or(1, Failure::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
