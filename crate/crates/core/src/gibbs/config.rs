use crate::dynamics::{set_hyperparameters_from_data, DataHypers, HyperPreset, ModelShape};
use crate::error::{Error, Result};
use crate::hdp::HdpPriors;
use crate::linalg::{is_spd, Mat, Vector};

/// How the dynamic matrices are tied across modes.
#[derive(Debug, Clone, PartialEq)]
pub enum Sharing {
    PerMode,
    /// One A for every mode; modes differ through Σ^(k) and μ^(k).
    Shared,
    /// A is known and never resampled.
    Fixed(Mat),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorFamily {
    Mniw,
    Ard,
    /// Independent normal on A, inverse Wishart on Σ, normal on μ.
    Niwn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasurementNoise {
    Gaussian,
    /// Truncated DP mixture of zero-mean Gaussians.
    Mixture { components: usize, concentration: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Every this many sweeps the SLDS modes are also drawn with x integrated out; 0 disables.
    pub sequential_period: usize,
    /// Gibbs passes over (A, α, Σ, μ) per sweep when they are not drawn jointly.
    pub inner_iterations: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            iterations: 1000,
            burn_in: 500,
            thin: 1,
            sequential_period: 10,
            inner_iterations: 5,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.thin == 0 || self.inner_iterations == 0 {
            return Err(Error::param("iterations, thinning and inner iterations must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::param("burn-in must be shorter than the run"));
        }
        Ok(())
    }

    pub fn records(&self, iteration: usize) -> bool {
        (iteration + 1) % self.thin == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub shape: ModelShape,
    pub sharing: Sharing,
    pub prior: PriorFamily,
    /// Mode-specific process-noise means μ^(k).
    pub switching_mean: bool,
    pub truncation: usize,
    pub hdp: HdpPriors,
    pub hypers: DataHypers,
    pub noise: MeasurementNoise,
    /// Covariance P0 of x_0 ~ N(0, P0); defaults to 10 times the mean diagonal of S0.
    pub initial_state_cov: Option<Mat>,
    pub schedule: Schedule,
    /// Per-step fixed mode labels (0-based).
    pub supervision: Option<Vec<Option<usize>>>,
}

impl ModelConfig {
    /// Per-mode dynamics, Gaussian measurement noise, data-driven hyperparameters.
    pub fn from_data(y: &[Vector], shape: ModelShape, prior: PriorFamily, truncation: usize) -> Result<Self> {
        let hypers = set_hyperparameters_from_data(y, shape, HyperPreset::default())?;
        Ok(ModelConfig {
            shape,
            sharing: Sharing::PerMode,
            prior,
            switching_mean: false,
            truncation,
            hdp: HdpPriors::default(),
            hypers,
            noise: MeasurementNoise::Gaussian,
            initial_state_cov: None,
            schedule: Schedule::default(),
            supervision: None,
        })
    }

    pub fn is_slds(&self) -> bool {
        matches!(self.shape, ModelShape::Slds { .. })
    }

    pub fn initial_state_cov(&self) -> Mat {
        let n = self.shape.psi_dim();
        match &self.initial_state_cov {
            Some(p) => p.clone(),
            None => {
                let s0 = &self.hypers.mniw.s0;
                Mat::identity(n, n) * (10.0 * s0.trace() / n as f64)
            }
        }
    }

    pub fn validate(&self, t_len: usize) -> Result<()> {
        self.schedule.validate()?;
        self.hdp.validate()?;
        if self.truncation == 0 {
            return Err(Error::param("truncation level must be at least 1"));
        }
        if t_len == 0 {
            return Err(Error::param("no observations"));
        }
        let (l, m) = (self.shape.psi_dim(), self.shape.regressor_dim());
        if let ModelShape::Slds { d, n } = self.shape {
            if n < d || d == 0 {
                return Err(Error::param("SLDS needs 1 <= d <= n"));
            }
        }
        if let ModelShape::Ar { order, d } = self.shape {
            if order == 0 || d == 0 {
                return Err(Error::param("AR order and dimension must be positive"));
            }
        }
        match (&self.sharing, self.prior) {
            (Sharing::PerMode, _) => {}
            (_, PriorFamily::Niwn) => {}
            _ => {
                return Err(Error::param(
                    "shared or fixed dynamic matrices need the independent normal / inverse-Wishart prior",
                ))
            }
        }
        if let Sharing::Fixed(a) = &self.sharing {
            if a.shape() != (l, m) {
                return Err(Error::param(format!("fixed dynamic matrix must be {l}x{m}")));
            }
        }
        let h = &self.hypers;
        h.mniw.validate()?;
        if h.mniw.m.shape() != (l, m) {
            return Err(Error::param(format!("MNIW mean must be {l}x{m}")));
        }
        match self.prior {
            PriorFamily::Mniw => {}
            PriorFamily::Ard => {
                h.ard.validate()?;
                if h.ard.rows != l || h.ard.column_group.len() != m {
                    return Err(Error::param("ARD groups do not match the model shape"));
                }
            }
            PriorFamily::Niwn => h.a_prior.validate(l * m, "dynamic matrix")?,
        }
        if self.switching_mean {
            h.process_mean.validate(l, "process-noise mean")?;
        }
        if self.is_slds() {
            let d = self.shape.obs_dim();
            match self.noise {
                MeasurementNoise::Gaussian => {
                    let r = h
                        .measurement
                        .as_ref()
                        .ok_or_else(|| Error::param("SLDS needs a measurement-noise prior"))?;
                    r.validate()?;
                    if r.dim() != d {
                        return Err(Error::param("measurement-noise prior has the wrong dimension"));
                    }
                }
                MeasurementNoise::Mixture {
                    components,
                    concentration,
                } => {
                    if components == 0 || !(concentration > 0.0) {
                        return Err(Error::param("mixture noise needs components >= 1 and a positive concentration"));
                    }
                    h.mixture_component.validate()?;
                    if h.mixture_component.dim() != d {
                        return Err(Error::param("mixture component prior has the wrong dimension"));
                    }
                }
            }
            let p0 = self.initial_state_cov();
            if p0.shape() != (l, l) || !is_spd(&p0) {
                return Err(Error::param("initial state covariance must be positive definite"));
            }
        } else if self.noise != MeasurementNoise::Gaussian {
            return Err(Error::param("mixture measurement noise applies to SLDS models only"));
        }
        if let Some(sup) = &self.supervision {
            if sup.len() != t_len {
                return Err(Error::param(format!(
                    "supervision has {} labels for {} observations",
                    sup.len(),
                    t_len
                )));
            }
            if sup.iter().flatten().any(|&k| k >= self.truncation) {
                return Err(Error::param("supervised label exceeds truncation level"));
            }
        }
        Ok(())
    }
}

/// Observations, with the r pre-sample values an AR(r) model conditions on.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub context: Vec<Vector>,
    pub y: Vec<Vector>,
}

impl Observations {
    pub fn new(y: Vec<Vector>) -> Self {
        Observations { context: Vec::new(), y }
    }

    /// Use the first `order` rows of `y` as context.
    pub fn split_context(mut y: Vec<Vector>, order: usize) -> Result<Self> {
        if y.len() <= order {
            return Err(Error::param("series shorter than the AR order"));
        }
        let rest = y.split_off(order);
        Ok(Observations { context: y, y: rest })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn validate(&self, shape: ModelShape) -> Result<()> {
        let d = shape.obs_dim();
        if self.y.iter().chain(&self.context).any(|v| v.len() != d) {
            return Err(Error::param(format!("observations must have dimension {d}")));
        }
        if self.y.iter().chain(&self.context).any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::param("observations contain non-finite values"));
        }
        if let ModelShape::Ar { order, .. } = shape {
            if self.context.len() < order {
                return Err(Error::param(format!("AR({order}) needs {order} context observations")));
            }
        }
        Ok(())
    }
}
