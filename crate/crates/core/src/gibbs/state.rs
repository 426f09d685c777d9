use rand::Rng;

use super::config::{MeasurementNoise, ModelConfig, Observations, PriorFamily, Sharing};
use crate::distributions::{sample_inverse_wishart, InformationGaussian};
use crate::dynamics::{sample_mniw_prior, ArdState, MixtureNoise, ModeDynamics, ModelShape, PseudoObsRegression};
use crate::error::{Error, Result};
use crate::hdp::{sample_mode_chain, sample_prior_transitions, HdpHyper, TransitionSet};
use crate::linalg::{sample_mvn, unvec_cols, Mat, Vector};
use crate::states::{backward_filter_from_evidence, forward_sample_states, local_evidence, BackwardForm, StateSample};

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseState {
    Gaussian(Mat),
    Mixture(MixtureNoise),
}

impl NoiseState {
    /// One shared covariance, or one per time step for the mixture.
    pub fn covariances(&self) -> Vec<Mat> {
        match self {
            NoiseState::Gaussian(r) => vec![r.clone()],
            NoiseState::Mixture(m) => (0..m.labels.len()).map(|t| m.covariance_at(t).clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub z: Vec<usize>,
    /// Continuous states (SLDS only).
    pub states: Option<StateSample>,
    pub trans: TransitionSet,
    pub hyper: HdpHyper,
    pub dynamics: Vec<ModeDynamics>,
    /// Per-mode ARD precisions; empty unless the ARD prior is used.
    pub ard: Vec<ArdState>,
    pub noise: Option<NoiseState>,
    pub iteration: usize,
}

fn sample_normal_prior<R: Rng + ?Sized>(
    prior: &crate::dynamics::NormalPrior,
    rng: &mut R,
) -> Result<Vector> {
    sample_mvn(&prior.mean, &prior.cov, rng)
}

/// Draw every mode's (A, Σ, μ) and ARD precisions from the prior.
pub fn sample_dynamics_prior<R: Rng + ?Sized>(
    config: &ModelConfig,
    rng: &mut R,
) -> Result<(Vec<ModeDynamics>, Vec<ArdState>)> {
    let h = &config.hypers;
    let (l, m) = (config.shape.psi_dim(), config.shape.regressor_dim());
    let shared_a = match (&config.sharing, config.prior) {
        (Sharing::Fixed(a), _) => Some(a.clone()),
        (Sharing::Shared, _) => Some(unvec_cols(&sample_normal_prior(&h.a_prior, rng)?, l, m)),
        _ => None,
    };
    let mut dynamics = Vec::with_capacity(config.truncation);
    let mut ard = Vec::new();
    for _ in 0..config.truncation {
        let mut dk = match config.prior {
            PriorFamily::Mniw => sample_mniw_prior(&h.mniw, rng)?,
            PriorFamily::Ard => {
                let mut st = h.ard.clone();
                st.alphas = st.sample_prior_precisions(rng)?;
                let prior = InformationGaussian {
                    theta: Vector::zeros(l * m),
                    lambda: Mat::from_diagonal(&st.prior_precision_diag()),
                };
                let a = unvec_cols(&prior.sample(rng)?, l, m);
                ard.push(st);
                ModeDynamics {
                    a,
                    sigma: sample_inverse_wishart(&h.mniw.iw(), rng)?,
                    mu: None,
                }
            }
            PriorFamily::Niwn => {
                let a = match &shared_a {
                    Some(a) => a.clone(),
                    None => unvec_cols(&sample_normal_prior(&h.a_prior, rng)?, l, m),
                };
                ModeDynamics {
                    a,
                    sigma: sample_inverse_wishart(&h.mniw.iw(), rng)?,
                    mu: None,
                }
            }
        };
        if config.switching_mean {
            dk.mu = Some(sample_normal_prior(&h.process_mean, rng)?);
        }
        dynamics.push(dk);
    }
    Ok((dynamics, ard))
}

pub fn sample_noise_prior<R: Rng + ?Sized>(
    config: &ModelConfig,
    t_len: usize,
    rng: &mut R,
) -> Result<Option<NoiseState>> {
    if !config.is_slds() {
        return Ok(None);
    }
    let h = &config.hypers;
    Ok(Some(match config.noise {
        MeasurementNoise::Gaussian => {
            let prior = h
                .measurement
                .as_ref()
                .ok_or_else(|| Error::param("SLDS needs a measurement-noise prior"))?;
            NoiseState::Gaussian(sample_inverse_wishart(prior, rng)?)
        }
        MeasurementNoise::Mixture {
            components,
            concentration,
        } => NoiseState::Mixture(MixtureNoise::sample_prior(
            components,
            concentration,
            h.mixture_component.clone(),
            t_len,
            rng,
        )?),
    }))
}

/// Exact draw of x_{0:T} given (y, z, θ, R).
pub fn sample_states<R: Rng + ?Sized>(
    config: &ModelConfig,
    data: &Observations,
    z: &[usize],
    dynamics: &[ModeDynamics],
    noise: &NoiseState,
    rng: &mut R,
) -> Result<StateSample> {
    let n = config.shape.psi_dim();
    let local = local_evidence(&data.y, n, &noise.covariances())?;
    let bank = backward_filter_from_evidence(&local, z, dynamics, BackwardForm::Stable)?;
    forward_sample_states(&bank, z, dynamics, &config.initial_state_cov(), rng)
}

/// Pseudo-observations: y with lagged regressors for AR models, x with x_{t−1} for the SLDS.
pub fn pseudo_observations(config: &ModelConfig, data: &Observations, state: &ChainState) -> Result<PseudoObsRegression> {
    match config.shape {
        ModelShape::Ar { order, .. } => {
            PseudoObsRegression::autoregressive(&data.context, &data.y, order, state.z.clone())
        }
        ModelShape::Slds { .. } => {
            let s = state
                .states
                .as_ref()
                .ok_or_else(|| Error::param("SLDS chain state has no continuous states"))?;
            let mut psibar = Vec::with_capacity(s.x.len());
            psibar.push(s.x0.clone());
            psibar.extend(s.x[..s.x.len() - 1].iter().cloned());
            PseudoObsRegression::new(s.x.clone(), psibar, state.z.clone())
        }
    }
}

impl ChainState {
    /// Hyperparameters, transitions, z and θ from the prior; x from its
    /// conditional given those.
    pub fn initialize<R: Rng + ?Sized>(config: &ModelConfig, data: &Observations, rng: &mut R) -> Result<Self> {
        config.validate(data.len())?;
        data.validate(config.shape)?;
        let hyper = config.hdp.sample(rng)?;
        let trans = sample_prior_transitions(&hyper, config.truncation, rng)?;
        let mut z = sample_mode_chain(&trans, data.len(), rng);
        if let Some(sup) = &config.supervision {
            for (zt, lab) in z.iter_mut().zip(sup) {
                if let Some(k) = lab {
                    *zt = *k;
                }
            }
        }
        let (dynamics, ard) = sample_dynamics_prior(config, rng)?;
        let noise = sample_noise_prior(config, data.len(), rng)?;
        let states = match &noise {
            Some(ns) => Some(sample_states(config, data, &z, &dynamics, ns, rng)?),
            None => None,
        };
        Ok(ChainState {
            z,
            states,
            trans,
            hyper,
            dynamics,
            ard,
            noise,
            iteration: 0,
        })
    }

    /// Number of modes holding more than `fraction` of the time steps.
    pub fn active_modes(&self, fraction: f64) -> usize {
        let mut counts = vec![0usize; self.dynamics.len()];
        for &k in &self.z {
            counts[k] += 1;
        }
        let t = self.z.len() as f64;
        counts.iter().filter(|&&c| c as f64 > fraction * t).count()
    }
}
