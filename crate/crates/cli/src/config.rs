//! File-backed run configuration (TOML or JSON). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use hdp_slds::dynamics::{set_hyperparameters_from_data, HyperPreset, ModelShape};
use hdp_slds::gibbs::{MeasurementNoise, ModelConfig, Observations, PriorFamily, Schedule, Sharing};
use hdp_slds::hdp::{ConcentrationPrior, HdpPriors, StickinessPrior};
use hdp_slds::linalg::{Mat, Vector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::io;
use crate::preprocess::{fit_transform, PreprocessMeta, PreprocessSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Observation CSV; relative paths resolve against the config file.
    pub data: PathBuf,
    #[serde(default)]
    pub supervision: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub preprocess: PreprocessSpec,
    pub model: ModelSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
}

fn default_seed() -> u64 {
    1
}

fn default_chains() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("run")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Ar,
    Slds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorName {
    Mniw,
    Ard,
    Niwn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SharingName {
    PerMode,
    Shared,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetName {
    Standard,
    PartiallySupervised,
    StochasticVolatility,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseSection {
    Gaussian,
    Mixture { components: usize, concentration: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaPrior {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedValue {
    pub fixed: f64,
}

/// `{ shape, rate }` for a Gamma hyperprior or `{ fixed }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Concentration {
    Gamma(GammaPrior),
    Fixed(FixedValue),
}

/// `{ a, b }` for a Beta prior on ρ = κ/(α+κ) or `{ fixed }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Stickiness {
    Beta(BetaPrior),
    Fixed(FixedValue),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HdpSection {
    pub alpha_plus_kappa: Option<Concentration>,
    pub gamma: Option<Concentration>,
    pub rho: Option<Stickiness>,
    /// Shorthand for rho = { fixed = 0 }.
    pub non_sticky: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    /// AR order.
    #[serde(default)]
    pub order: Option<usize>,
    /// SLDS state dimension; defaults to the observation dimension.
    #[serde(default)]
    pub state_dim: Option<usize>,
    pub prior: PriorName,
    #[serde(default = "default_sharing")]
    pub sharing: SharingName,
    /// Row-major dynamic matrix for `sharing = "fixed"`.
    #[serde(default)]
    pub fixed_a: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub switching_mean: bool,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default = "default_preset")]
    pub preset: PresetName,
    #[serde(default = "default_noise")]
    pub noise: NoiseSection,
    #[serde(default)]
    pub initial_state_cov: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub hdp: HdpSection,
}

fn default_sharing() -> SharingName {
    SharingName::PerMode
}

fn default_truncation() -> usize {
    20
}

fn default_preset() -> PresetName {
    PresetName::Standard
}

fn default_noise() -> NoiseSection {
    NoiseSection::Gaussian
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub sequential_period: usize,
    pub inner_iterations: usize,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        let s = Schedule::default();
        ScheduleSection {
            iterations: s.iterations,
            burn_in: s.burn_in,
            thin: s.thin,
            sequential_period: s.sequential_period,
            inner_iterations: s.inner_iterations,
        }
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Mat> {
    let c = rows.first().map_or(0, |r| r.len());
    if rows.is_empty() || c == 0 || rows.iter().any(|r| r.len() != c) {
        return Err(CliError::config(format!("{what} must be a non-empty rectangular matrix")));
    }
    Ok(Mat::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

/// Observations and the model they feed, after preprocessing.
pub struct Prepared {
    pub observations: Observations,
    pub model: ModelConfig,
    pub preprocessing: PreprocessMeta,
}

impl RunConfig {
    /// Parse by extension: `.json` as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        };
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.data = base.join(&cfg.data);
        cfg.supervision = cfg.supervision.map(|p| base.join(p));
        cfg.output = base.join(&cfg.output);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(CliError::config("chains must be at least 1"));
        }
        let m = &self.model;
        match (m.kind, m.order, m.state_dim) {
            (ModelKind::Ar, None, _) => return Err(CliError::config("AR models need `order`")),
            (ModelKind::Ar, _, Some(_)) => return Err(CliError::config("`state_dim` applies to SLDS models only")),
            (ModelKind::Slds, Some(_), _) => return Err(CliError::config("`order` applies to AR models only")),
            _ => {}
        }
        if (m.sharing == SharingName::Fixed) != m.fixed_a.is_some() {
            return Err(CliError::config("`fixed_a` is required exactly when sharing = \"fixed\""));
        }
        if m.hdp.non_sticky && m.hdp.rho.is_some() {
            return Err(CliError::config("give either `non_sticky` or `rho`, not both"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form; any field change changes it.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(canonical))
    }

    fn shape(&self, d: usize) -> ModelShape {
        match self.model.kind {
            ModelKind::Ar => ModelShape::Ar { d, order: self.model.order.unwrap_or(1) },
            ModelKind::Slds => ModelShape::Slds { d, n: self.model.state_dim.unwrap_or(d) },
        }
    }

    pub fn prepare(&self) -> Result<Prepared> {
        let series = io::read_series(&self.data)?;
        let (rows, preprocessing) = fit_transform(&series.rows, &self.preprocess)?;
        let d = rows[0].len();
        let shape = self.shape(d);
        let observations = match shape {
            ModelShape::Ar { order, .. } => Observations::split_context(rows.clone(), order)?,
            ModelShape::Slds { .. } => Observations::new(rows.clone()),
        };
        let model = self.model_config(&observations, shape)?;
        Ok(Prepared {
            observations,
            model,
            preprocessing,
        })
    }

    pub fn model_config(&self, observations: &Observations, shape: ModelShape) -> Result<ModelConfig> {
        let m = &self.model;
        let prior = match m.prior {
            PriorName::Mniw => PriorFamily::Mniw,
            PriorName::Ard => PriorFamily::Ard,
            PriorName::Niwn => PriorFamily::Niwn,
        };
        // Hyperparameters see the whole preprocessed series, context included.
        let all: Vec<Vector> = observations.context.iter().chain(&observations.y).cloned().collect();
        let mut cfg = ModelConfig::from_data(&all, shape, prior, m.truncation)?;
        let preset = match m.preset {
            PresetName::Standard => HyperPreset::default(),
            PresetName::PartiallySupervised => HyperPreset::PartiallySupervised,
            PresetName::StochasticVolatility => HyperPreset::StochasticVolatility,
        };
        cfg.hypers = set_hyperparameters_from_data(&all, shape, preset)?;
        cfg.sharing = match m.sharing {
            SharingName::PerMode => Sharing::PerMode,
            SharingName::Shared => Sharing::Shared,
            SharingName::Fixed => Sharing::Fixed(matrix(m.fixed_a.as_deref().unwrap_or(&[]), "fixed_a")?),
        };
        cfg.switching_mean = m.switching_mean;
        cfg.noise = match m.noise {
            NoiseSection::Gaussian => MeasurementNoise::Gaussian,
            NoiseSection::Mixture { components, concentration } => {
                MeasurementNoise::Mixture { components, concentration }
            }
        };
        if let Some(p0) = &m.initial_state_cov {
            cfg.initial_state_cov = Some(matrix(p0, "initial_state_cov")?);
        }
        let conc = |c: Option<Concentration>, default: ConcentrationPrior| match c {
            None => default,
            Some(Concentration::Gamma(GammaPrior { shape, rate })) => ConcentrationPrior::Gamma { shape, rate },
            Some(Concentration::Fixed(FixedValue { fixed })) => ConcentrationPrior::Fixed(fixed),
        };
        let d = HdpPriors::default();
        cfg.hdp = HdpPriors {
            alpha_plus_kappa: conc(m.hdp.alpha_plus_kappa, d.alpha_plus_kappa),
            gamma: conc(m.hdp.gamma, d.gamma),
            rho: match m.hdp.rho {
                None => d.rho,
                Some(Stickiness::Beta(BetaPrior { a, b })) => StickinessPrior::Beta { a, b },
                Some(Stickiness::Fixed(FixedValue { fixed })) => StickinessPrior::Fixed(fixed),
            },
        };
        if m.hdp.non_sticky {
            cfg.hdp = cfg.hdp.non_sticky();
        }
        let s = &self.schedule;
        cfg.schedule = Schedule {
            iterations: s.iterations,
            burn_in: s.burn_in,
            thin: s.thin,
            sequential_period: s.sequential_period,
            inner_iterations: s.inner_iterations,
        };
        if let Some(path) = &self.supervision {
            let mut labels = io::read_supervision(path)?;
            let skip = observations.context.len();
            if labels.len() != skip + observations.len() {
                return Err(CliError::config(format!(
                    "{} has {} labels for {} preprocessed rows",
                    path.display(),
                    labels.len(),
                    skip + observations.len()
                )));
            }
            cfg.supervision = Some(labels.split_off(skip));
        }
        cfg.validate(observations.len())?;
        Ok(cfg)
    }
}
