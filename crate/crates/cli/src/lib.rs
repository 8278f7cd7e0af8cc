//! Batch runners behind the `floqctl` binary: minimal-time gates, tangle
//! plateaus, spin-chain entanglement and the validation suites.

pub mod config;
pub mod experiments;
pub mod output;
pub mod validate;

use std::fmt;
use std::path::Path;

use config::{ExperimentConfig, ExperimentKind};

/// Failures that map to distinct exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable or inconsistent configuration (exit 2).
    Config(String),
    /// Optimization finished below its threshold (exit 3).
    Convergence(String),
    /// At least one validation suite failed (exit 1).
    Validation(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::Config(_) => 2,
            Self::Convergence(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Convergence(m) => write!(f, "did not converge: {m}"),
            Self::Validation(m) => write!(f, "validation failed: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

/// Runs the configured experiment and writes its artifacts into `out`.
/// Artifacts are written before a convergence or validation failure is
/// reported.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<()> {
    cfg.validate()?;
    let failure = match cfg.experiment {
        ExperimentKind::GateMinTime => {
            let s = experiments::gate_min_time(cfg, out)?;
            (!s.converged).then(|| Failure::Convergence(format!("F0 = {:.10} < {}", s.f0, s.threshold)))
        }
        ExperimentKind::TanglePlateau => {
            let s = experiments::tangle_plateau(cfg, out)?;
            (!s.converged).then(|| Failure::Convergence(format!("tangle at t_f below {}", s.threshold)))
        }
        ExperimentKind::ChainEntangle => {
            let s = experiments::chain_entangle(cfg, out)?;
            (!s.converged).then(|| Failure::Convergence(format!("end-spin bound {:.10} < {}", s.f0, s.threshold)))
        }
        ExperimentKind::Validate => {
            let r = validate::run_validate(cfg, out)?;
            let failed: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            (!failed.is_empty()).then(|| Failure::Validation(failed.join(", ")))
        }
    };
    match failure {
        Some(f) => Err(f.into()),
        None => Ok(()),
    }
}
