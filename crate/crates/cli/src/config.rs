//! Experiment configuration files (TOML).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use floquet_control::floquet::{Truncation, COMPLETENESS_WARN};
use floquet_control::optimizer::OptimizerConfig;
use floquet_control::spinsys::{BlochProductState, ChainParams, TwoSpinParams};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    GateMinTime,
    TanglePlateau,
    ChainEntangle,
    Validate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::GateMinTime => "gate-min-time",
            Self::TanglePlateau => "tangle-plateau",
            Self::ChainEntangle => "chain-entangle",
            Self::Validate => "validate",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [Self::GateMinTime, Self::TanglePlateau, Self::ChainEntangle, Self::Validate]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment {s:?}"))
    }
}

/// `nu_max = 32` or `nu_max = "auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "NuMaxRepr", into = "NuMaxRepr")]
pub enum NuMax {
    Auto,
    Fixed(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NuMaxRepr {
    Fixed(usize),
    Word(String),
}

impl TryFrom<NuMaxRepr> for NuMax {
    type Error = String;
    fn try_from(r: NuMaxRepr) -> Result<Self, String> {
        match r {
            NuMaxRepr::Fixed(n) => Ok(Self::Fixed(n)),
            NuMaxRepr::Word(w) => w.parse(),
        }
    }
}

impl From<NuMax> for NuMaxRepr {
    fn from(n: NuMax) -> Self {
        match n {
            NuMax::Auto => Self::Word("auto".into()),
            NuMax::Fixed(n) => Self::Fixed(n),
        }
    }
}

impl FromStr for NuMax {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        s.parse().map(Self::Fixed).map_err(|_| format!("nu_max must be a non-negative integer or \"auto\", got {s:?}"))
    }
}

impl Default for NuMax {
    fn default() -> Self {
        Self::Auto
    }
}

/// Two spins by name, or a chain given as lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemConfig {
    TwoSpin(TwoSpinParams),
    Chain(ChainParams),
}

impl SystemConfig {
    pub fn chain(&self) -> ChainParams {
        match self {
            Self::TwoSpin(p) => p.to_chain(),
            Self::Chain(c) => c.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSection {
    /// `(α_x, α_y, α_z)` of the canonical target gate.
    pub alpha: [f64; 3],
    #[serde(default)]
    pub modulus: bool,
    /// Pulse length the search starts from, µs.
    pub initial_duration: f64,
    /// Admissible pulse lengths, µs.
    pub duration_range: [f64; 2],
    /// Second, stricter threshold for a continuation run.
    #[serde(default)]
    pub continuation_threshold: Option<f64>,
    /// Iteration cap of the continuation run; defaults to `optimizer.max_iters`.
    #[serde(default)]
    pub continuation_iters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TangleSection {
    pub initial: BlochProductState,
    /// Pulse length `t_f`, µs.
    pub duration: f64,
    pub curvature_penalty: f64,
    /// Further evaluation times for a multi-time run, µs.
    #[serde(default)]
    pub extra_times: Vec<f64>,
    #[serde(default = "default_plateau_threshold")]
    pub plateau_threshold: f64,
}

fn default_plateau_threshold() -> f64 {
    0.999
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub initial: BlochProductState,
    /// Pulse length `t_f`, µs.
    pub duration: f64,
    /// Target for the end-spin bound; below it the run counts as failed.
    #[serde(default = "default_chain_threshold")]
    pub threshold: f64,
}

fn default_chain_threshold() -> f64 {
    1.0 - 1e-5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    /// Relative coupling errors, one robust training per entry.
    pub epsilons: Vec<f64>,
    #[serde(default = "default_members")]
    pub members: usize,
    #[serde(default = "default_test_members")]
    pub test_members: usize,
    /// Iteration cap of each robust training, which starts from the nominal
    /// pulse; defaults to `optimizer.max_iters`.
    #[serde(default)]
    pub train_iters: Option<usize>,
}

fn default_members() -> usize {
    10
}

fn default_test_members() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub ode_two_spin: usize,
    pub ode_three_spin: usize,
    pub derivative_instances: usize,
    pub objective_instances: usize,
    pub gauge_instances: usize,
    pub structure_instances: usize,
    pub lower_bound_instances: usize,
    pub truncation_instances: usize,
    pub truncation_tol: f64,
    /// Scale of the random amplitudes in the fixed-truncation check.
    pub amplitude_scale: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            ode_two_spin: 20,
            ode_three_spin: 5,
            derivative_instances: 30,
            objective_instances: 5,
            gauge_instances: 5,
            structure_instances: 20,
            lower_bound_instances: 300,
            truncation_instances: 5,
            truncation_tol: 1e-10,
            amplitude_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub samples: usize,
    /// Time-series horizon in units of `t_f`.
    pub horizon: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), samples: 1000, horizon: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default)]
    pub nu_max: NuMax,
    /// Completeness tolerance for `nu_max = "auto"`.
    #[serde(default = "default_truncation_tol")]
    pub truncation_tol: f64,
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub gate: Option<GateSection>,
    #[serde(default)]
    pub tangle: Option<TangleSection>,
    #[serde(default)]
    pub chain: Option<ChainSection>,
    #[serde(default)]
    pub ensemble: Option<EnsembleSection>,
    #[serde(default)]
    pub validate: Option<ValidateSection>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_n_max() -> usize {
    6
}

fn default_truncation_tol() -> f64 {
    COMPLETENESS_WARN
}

fn config_error(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

fn require<'a, T>(section: &'a Option<T>, name: &str, kind: ExperimentKind) -> Result<&'a T, Failure> {
    section.as_ref().ok_or_else(|| config_error(format!("{kind} needs a [{name}] section")))
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        Ok(cfg)
    }

    pub fn truncation(&self) -> Truncation {
        match self.nu_max {
            NuMax::Fixed(n) => Truncation::Fixed(n),
            NuMax::Auto => Truncation::Auto { min: self.n_max + 2, tol: self.truncation_tol },
        }
    }

    pub fn system(&self) -> Result<ChainParams, Failure> {
        let sys = require(&self.system, "system", self.experiment)?.chain();
        sys.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(sys)
    }

    /// Per-experiment required sections and value ranges.
    pub fn validate(&self) -> Result<(), Failure> {
        let kind = self.experiment;
        self.optimizer.validate().map_err(|e| config_error(e.to_string()))?;
        positive("truncation_tol", self.truncation_tol)?;
        positive("output.horizon", self.output.horizon)?;
        if self.output.samples < 2 {
            return Err(config_error("output.samples must be at least 2"));
        }
        if kind == ExperimentKind::Validate {
            return Ok(());
        }
        if self.n_max == 0 {
            return Err(config_error("n_max must be at least 1"));
        }
        if let NuMax::Fixed(n) = self.nu_max {
            if n < self.n_max {
                return Err(config_error(format!("nu_max = {n} is below n_max = {}", self.n_max)));
            }
        }
        let sys = self.system()?;
        match kind {
            ExperimentKind::GateMinTime => {
                let g = require(&self.gate, "gate", kind)?;
                if sys.n_sites() != 2 {
                    return Err(config_error("gate-min-time needs a two-spin system"));
                }
                positive("gate.initial_duration", g.initial_duration)?;
                let [lo, hi] = g.duration_range;
                positive("gate.duration_range[0]", lo)?;
                if !(lo < hi) || !(lo..=hi).contains(&g.initial_duration) {
                    return Err(config_error("gate.duration_range must be increasing and contain initial_duration"));
                }
                if g.alpha.iter().any(|a| !a.is_finite()) {
                    return Err(config_error("gate.alpha must be finite"));
                }
            }
            ExperimentKind::TanglePlateau => {
                let t = require(&self.tangle, "tangle", kind)?;
                if sys.n_sites() != 2 || t.initial.n_sites() != 2 {
                    return Err(config_error("tangle-plateau needs two spins"));
                }
                t.initial.validate().map_err(|e| config_error(e.to_string()))?;
                positive("tangle.duration", t.duration)?;
                if !(t.curvature_penalty >= 0.0) {
                    return Err(config_error("tangle.curvature_penalty must be ≥ 0"));
                }
                if t.extra_times.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err(config_error("tangle.extra_times must be positive"));
                }
            }
            ExperimentKind::ChainEntangle => {
                let c = require(&self.chain, "chain", kind)?;
                if !(3..=4).contains(&sys.n_sites()) {
                    return Err(config_error("chain-entangle needs 3 or 4 spins"));
                }
                if c.initial.n_sites() != sys.n_sites() {
                    return Err(config_error("chain.initial must have one angle pair per spin"));
                }
                c.initial.validate().map_err(|e| config_error(e.to_string()))?;
                positive("chain.duration", c.duration)?;
                if let Some(e) = &self.ensemble {
                    if e.epsilons.iter().any(|&x| !(x >= 0.0 && x < 1.0)) || e.members == 0 || e.test_members == 0 {
                        return Err(config_error("ensemble needs epsilons in [0, 1) and positive member counts"));
                    }
                }
            }
            ExperimentKind::Validate => unreachable!(),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GATE: &str = r#"
experiment = "gate-min-time"
seed = 3
nu_max = "auto"

[system]
omega1 = 0.13
omega2 = 0.26
gx = 5.40
gy = 9.95

[gate]
alpha = [0.5, 0.4, 0.3]
initial_duration = 0.15
duration_range = [0.03, 1.0]

[optimizer]
max_iters = 10
"#;

    #[test]
    fn parses_a_gate_config() {
        let cfg = ExperimentConfig::parse(GATE).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::GateMinTime);
        assert_eq!(cfg.nu_max, NuMax::Auto);
        assert_eq!(cfg.optimizer.max_iters, 10);
        assert_eq!(cfg.system().unwrap().gy, vec![9.95]);
    }

    #[test]
    fn nu_max_forms() {
        assert_eq!("auto".parse::<NuMax>().unwrap(), NuMax::Auto);
        assert_eq!("12".parse::<NuMax>().unwrap(), NuMax::Fixed(12));
        assert!("twelve".parse::<NuMax>().is_err());
        let cfg = ExperimentConfig::parse(&GATE.replace("\"auto\"", "2")).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn missing_sections_and_unknown_keys_are_config_errors() {
        let no_gate = GATE.split("[gate]").next().unwrap();
        let cfg = ExperimentConfig::parse(no_gate).unwrap();
        assert!(matches!(cfg.validate(), Err(Failure::Config(_))));
        assert!(matches!(ExperimentConfig::parse(&format!("{GATE}\nbogus = 1\n")), Err(Failure::Config(_))));
    }
}
