//! Experiment configuration, read from a single TOML file.
//!
//! ```toml
//! model = "urn"
//! horizon = 100000
//! replicates = 100
//! master_seed = 42
//! checkpoints = [100, 1000, 10000, 100000]
//! initial = [1.0, 1.0]
//!
//! [generator]
//! kind = "deterministic"
//! matrix = [[0.0, 1.0], [1.0, 0.0]]
//!
//! [diagnostics]
//! sa_decomposition = true
//! tail_ce = true
//!
//! [output]
//! dir = "results/friedman"
//! ```
//!
//! Generator kinds: `deterministic`, `iid_mixture`, `adapted_perturbation`,
//! `proportion_feedback`, `erw`. With `model = "erw"` the walk is simulated
//! directly from the `[erw]` table instead.

use std::path::Path;

use serde::{Deserialize, Serialize};
use urnlab_core::erw::ErwRunOptions;
use urnlab_core::generator::{
    AdaptedPerturbation, Deterministic, IidScalarMixture, PerturbationNoise, ProportionFeedback, ReplacementGenerator,
};
use urnlab_core::moment::{MomentProfile, Phi};
use urnlab_core::urn::decade_checkpoints;
use urnlab_core::{ErwParams, ErwReplacement, Matrix, Reinforcement, ScalarLaw};

use crate::error::{from_setup, HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Urn,
    Erw,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Urn => "urn",
            Model::Erw => "erw",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawConfig {
    Constant { value: f64 },
    Exponential { mean: f64 },
    Pareto { scale: f64, shape: f64 },
    LogPareto,
    TwoPoint { low: f64, high: f64, p_high: f64 },
}

impl From<LawConfig> for ScalarLaw {
    fn from(law: LawConfig) -> Self {
        match law {
            LawConfig::Constant { value } => ScalarLaw::Constant { value },
            LawConfig::Exponential { mean } => ScalarLaw::Exponential { mean },
            LawConfig::Pareto { scale, shape } => ScalarLaw::Pareto { scale, shape },
            LawConfig::LogPareto => ScalarLaw::LogPareto,
            LawConfig::TwoPoint { low, high, p_high } => ScalarLaw::TwoPoint { low, high, p_high },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseConfig {
    TwoPoint,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReinforcementConfig {
    Constant { a: f64 },
    Exponential { mean: f64 },
    ScaledBernoulli { scale: f64, prob: f64 },
}

impl From<ReinforcementConfig> for Reinforcement {
    fn from(r: ReinforcementConfig) -> Self {
        match r {
            ReinforcementConfig::Constant { a } => Reinforcement::Constant { a },
            ReinforcementConfig::Exponential { mean } => Reinforcement::Exponential { mean },
            ReinforcementConfig::ScaledBernoulli { scale, prob } => Reinforcement::ScaledBernoulli { scale, prob },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErwConfig {
    pub d: usize,
    pub p: f64,
    pub q: f64,
    pub reinforcement: ReinforcementConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_budget: Option<u64>,
}

impl ErwConfig {
    pub fn params(&self) -> Result<ErwParams> {
        ErwParams::new(self.d, self.p, self.q, self.reinforcement.into()).map_err(from_setup)
    }

    pub fn run_options(&self, horizon: u64, checkpoints: Vec<u64>) -> ErwRunOptions {
        let mut opts = ErwRunOptions::new(horizon, checkpoints);
        if let Some(budget) = self.memory_budget {
            opts.memory_budget = budget;
        }
        opts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorConfig {
    Deterministic {
        matrix: Vec<Vec<f64>>,
    },
    IidMixture {
        base: Vec<Vec<f64>>,
        law: LawConfig,
    },
    AdaptedPerturbation {
        limit: Vec<Vec<f64>>,
        perturbation: Vec<Vec<f64>>,
        beta: f64,
        noise: NoiseConfig,
    },
    ProportionFeedback {
        limit: Vec<Vec<f64>>,
        epsilon: f64,
    },
    /// The memory urn of the elephant random walk.
    Erw(ErwConfig),
}

fn matrix(rows: &[Vec<f64>], field: &str) -> Result<Matrix> {
    Matrix::from_rows(rows).map_err(|e| HarnessError::Config(format!("{field}: {e}")))
}

impl GeneratorConfig {
    pub fn build(&self) -> Result<Box<dyn ReplacementGenerator<f64>>> {
        Ok(match self {
            GeneratorConfig::Deterministic { matrix: m } => {
                Box::new(Deterministic::new(matrix(m, "generator.matrix")?).map_err(from_setup)?)
            }
            GeneratorConfig::IidMixture { base, law } => Box::new(
                IidScalarMixture::new(matrix(base, "generator.base")?, (*law).into()).map_err(from_setup)?,
            ),
            GeneratorConfig::AdaptedPerturbation { limit, perturbation, beta, noise } => {
                let noise = match noise {
                    NoiseConfig::TwoPoint => PerturbationNoise::TwoPoint,
                    NoiseConfig::Exponential => PerturbationNoise::Exponential,
                };
                let perturbation = matrix(perturbation, "generator.perturbation")?;
                Box::new(
                    AdaptedPerturbation::new(matrix(limit, "generator.limit")?, perturbation, *beta, noise)
                        .map_err(from_setup)?,
                )
            }
            GeneratorConfig::ProportionFeedback { limit, epsilon } => Box::new(
                ProportionFeedback::new(matrix(limit, "generator.limit")?, *epsilon).map_err(from_setup)?,
            ),
            GeneratorConfig::Erw(erw) => Box::new(ErwReplacement::new(erw.params()?)),
        })
    }

    fn dim(&self) -> usize {
        match self {
            GeneratorConfig::Deterministic { matrix } => matrix.len(),
            GeneratorConfig::IidMixture { base, .. } => base.len(),
            GeneratorConfig::AdaptedPerturbation { limit, .. } | GeneratorConfig::ProportionFeedback { limit, .. } => {
                limit.len()
            }
            GeneratorConfig::Erw(erw) => erw.d + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateConfig {
    /// Window lengths `T`.
    pub horizons: Vec<f64>,
    /// Window starts `n` (1-based epochs).
    pub starts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileConfig {
    LogPower { p: f64 },
    LogLogPower { p: f64 },
    Majorized { c: f64, majorizer: LawConfig },
}

impl From<ProfileConfig> for MomentProfile {
    fn from(p: ProfileConfig) -> Self {
        match p {
            ProfileConfig::LogPower { p } => MomentProfile::PhiMoment(Phi::LogPower { p }),
            ProfileConfig::LogLogPower { p } => MomentProfile::PhiMoment(Phi::LogLogPower { p }),
            ProfileConfig::Majorized { c, majorizer } => MomentProfile::Majorized { c, majorizer: majorizer.into() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentConfig {
    pub profile: ProfileConfig,
    pub samples: usize,
    pub epochs: Vec<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Cesàro traces of δ, ξ, ‖H̃ − H‖ and η, plus the reconstruction residual.
    #[serde(default)]
    pub sa_decomposition: bool,
    /// Cesàro trace of the conditional tail expectation.
    #[serde(default)]
    pub tail_ce: bool,
    /// Distance of the path from the ODE solution at the algorithmic time.
    #[serde(default)]
    pub ode_compare: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment: Option<MomentConfig>,
}

impl DiagnosticsConfig {
    pub fn needs_monitor(&self) -> bool {
        self.sa_decomposition || self.tail_ce || self.certificate.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "OutputConfig::default_dir")]
    pub dir: String,
}

impl OutputConfig {
    fn default_dir() -> String {
        "results".into()
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: Self::default_dir() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    pub horizon: u64,
    pub replicates: u64,
    pub master_seed: u64,
    /// Defaults to powers of ten up to `horizon`, plus `horizon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    /// Initial composition; defaults to all ones, or for the ERW memory urn
    /// to one ball of a uniformly drawn type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub erw: Option<ErwConfig>,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.replicates < 1 {
            return bad("replicates must be at least 1".into());
        }
        if self.horizon < 1 {
            return bad("horizon must be at least 1".into());
        }
        if self.master_seed > i64::MAX as u64 {
            return bad(format!("master_seed must be at most {}", i64::MAX));
        }
        if let Some(cps) = &self.checkpoints {
            if cps.windows(2).any(|w| w[1] <= w[0]) {
                return bad("checkpoints must be strictly increasing".into());
            }
            if let Some(c) = cps.iter().find(|c| **c == 0 || **c > self.horizon) {
                return bad(format!("checkpoint {c} outside [1, horizon = {}]", self.horizon));
            }
        }
        match self.model {
            Model::Urn => {
                let Some(generator) = &self.generator else {
                    return bad("model \"urn\" needs a [generator] table".into());
                };
                if self.erw.is_some() {
                    return bad("[erw] belongs to model \"erw\"; use generator kind \"erw\" for the urn form".into());
                }
                if let Some(initial) = &self.initial {
                    if initial.len() != generator.dim() {
                        return bad(format!(
                            "initial has {} colors but the generator has {}",
                            initial.len(),
                            generator.dim()
                        ));
                    }
                    urnlab_core::Urn::new(initial.clone()).map_err(|e| HarnessError::Config(format!("initial: {e}")))?;
                }
            }
            Model::Erw => {
                if self.erw.is_none() {
                    return bad("model \"erw\" needs an [erw] table".into());
                }
                if self.generator.is_some() || self.initial.is_some() {
                    return bad("model \"erw\" takes neither [generator] nor initial".into());
                }
                if self.diagnostics.needs_monitor() || self.diagnostics.ode_compare || self.diagnostics.moment.is_some()
                {
                    return bad("diagnostics apply to model \"urn\" only".into());
                }
            }
        }
        if let Some(cert) = &self.diagnostics.certificate {
            if cert.horizons.iter().any(|t| !(*t > 0.0)) || cert.starts.contains(&0) {
                return bad("certificate horizons must be positive and starts at least 1".into());
            }
        }
        if let Some(moment) = &self.diagnostics.moment {
            MomentProfile::from(moment.profile).validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn resolved_checkpoints(&self) -> Vec<u64> {
        self.checkpoints.clone().unwrap_or_else(|| decade_checkpoints(self.horizon))
    }

    /// Canonical form: defaults written out explicitly.
    pub fn canonical(&self) -> Self {
        let mut c = self.clone();
        c.checkpoints = Some(self.resolved_checkpoints());
        if let (Model::Urn, None, Some(generator)) = (self.model, &self.initial, &self.generator) {
            if !matches!(generator, GeneratorConfig::Erw(_)) {
                c.initial = Some(vec![1.0; generator.dim()]);
            }
        }
        c
    }

    /// TOML text of the canonical form.
    pub fn to_canonical_toml(&self) -> Result<String> {
        toml::to_string(&self.canonical()).map_err(|e| HarnessError::Config(e.to_string()))
    }
}
