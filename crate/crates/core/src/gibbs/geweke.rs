//! Joint-distribution test of the full sweep: statistics of (θ, z, y) drawn
//! forward from the model are compared with those visited by alternating a
//! Gibbs sweep with a fresh draw of y given everything else.

use rand::Rng;

use super::config::{ModelConfig, Observations};
use super::state::{sample_dynamics_prior, sample_noise_prior, ChainState, NoiseState};
use super::sweep::{gibbs_sweep_with, SweepControl};
use super::synthetic::{emit_linear, simulate_ar, simulate_states};
use crate::dynamics::ModelShape;
use crate::error::{Error, Result};
use crate::hdp::{sample_mode_chain, sample_prior_transitions};
use crate::linalg::{sample_mvn, Vector};
use crate::rng::chain_rng;
use crate::states::StateSample;

pub const GEWEKE_STATISTICS: [&str; 5] = [
    "occupancy entropy",
    "lag-1 autocovariance of y",
    "alpha + kappa",
    "trace of Sigma(1)",
    "beta(1)",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GewekeResult {
    pub names: Vec<&'static str>,
    pub prior_means: Vec<f64>,
    pub gibbs_means: Vec<f64>,
    pub z_scores: Vec<f64>,
}

impl GewekeResult {
    pub fn max_abs_z(&self) -> f64 {
        self.z_scores.iter().fold(0.0, |a, z| a.max(z.abs()))
    }
}

fn statistics(state: &ChainState, y: &[Vector]) -> [f64; 5] {
    let t = state.z.len() as f64;
    let mut counts = vec![0usize; state.dynamics.len()];
    for &k in &state.z {
        counts[k] += 1;
    }
    let entropy = -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            p * p.ln()
        })
        .sum::<f64>();
    let ybar = y.iter().map(|v| v[0]).sum::<f64>() / t;
    let acov = y.windows(2).map(|w| (w[0][0] - ybar) * (w[1][0] - ybar)).sum::<f64>() / t;
    [
        entropy,
        acov,
        state.hyper.alpha_plus_kappa(),
        state.dynamics[0].sigma.trace(),
        state.trans.beta[0],
    ]
}

/// Draw observations given every latent quantity in `state`.
fn sample_observations<R: Rng + ?Sized>(
    config: &ModelConfig,
    context: &[Vector],
    state: &ChainState,
    rng: &mut R,
) -> Result<Vec<Vector>> {
    match config.shape {
        ModelShape::Ar { order, .. } => Ok(simulate_ar(context, &state.z, &state.dynamics, order, rng)?.y),
        ModelShape::Slds { .. } => {
            let x = &state.states.as_ref().ok_or_else(|| Error::param("missing states"))?.x;
            let noise = state.noise.as_ref().ok_or_else(|| Error::param("missing noise"))?;
            emit_linear(x, &noise.covariances(), rng)
        }
    }
}

/// Forward draw of the complete model: hyperparameters, transitions, z, θ, x, R and y.
pub fn sample_prior_state<R: Rng + ?Sized>(
    config: &ModelConfig,
    context: &[Vector],
    t_len: usize,
    rng: &mut R,
) -> Result<(ChainState, Observations)> {
    let hyper = config.hdp.sample(rng)?;
    let trans = sample_prior_transitions(&hyper, config.truncation, rng)?;
    let z = sample_mode_chain(&trans, t_len, rng);
    let (dynamics, ard) = sample_dynamics_prior(config, rng)?;
    let noise = sample_noise_prior(config, t_len, rng)?;
    let states = if config.is_slds() {
        let p0 = config.initial_state_cov();
        let x0 = sample_mvn(&Vector::zeros(p0.nrows()), &p0, rng)?;
        let x = simulate_states(&x0, &z, &dynamics, rng)?;
        Some(StateSample { x0, x })
    } else {
        None
    };
    let state = ChainState {
        z,
        states,
        trans,
        hyper,
        dynamics,
        ard,
        noise,
        iteration: 0,
    };
    let y = sample_observations(config, context, &state, rng)?;
    Ok((
        state,
        Observations {
            context: context.to_vec(),
            y,
        },
    ))
}

/// Batch-means estimate of the variance of a correlated sample mean.
fn batch_means_variance(x: &[f64], batches: usize) -> f64 {
    let size = x.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| x[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let v = means.iter().map(|b| (b - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    v / batches as f64
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v / n)
}

/// Compare `n_samples` independent forward draws against `n_samples`
/// successive-conditional Gibbs draws for a model with T = `t_len`.
pub fn geweke_joint_test(
    config: &ModelConfig,
    t_len: usize,
    n_samples: usize,
    control: SweepControl,
    seed: u64,
) -> Result<GewekeResult> {
    if n_samples < 100 {
        return Err(Error::param("joint-distribution test needs at least 100 samples per side"));
    }
    if config.supervision.is_some() {
        return Err(Error::param("joint-distribution test does not support supervision"));
    }
    config.validate(t_len)?;
    let context = match config.shape {
        ModelShape::Ar { d, order } => vec![Vector::zeros(d); order],
        ModelShape::Slds { .. } => Vec::new(),
    };

    let mut rng = chain_rng(seed, 0);
    let mut forward = vec![Vec::with_capacity(n_samples); 5];
    for _ in 0..n_samples {
        let (state, obs) = sample_prior_state(config, &context, t_len, &mut rng)?;
        for (i, s) in statistics(&state, &obs.y).into_iter().enumerate() {
            forward[i].push(s);
        }
    }

    let mut rng = chain_rng(seed, 1);
    let (mut state, mut obs) = sample_prior_state(config, &context, t_len, &mut rng)?;
    let mut gibbs = vec![Vec::with_capacity(n_samples); 5];
    for _ in 0..n_samples {
        state = gibbs_sweep_with(state, config, &obs, control, &mut rng)?;
        obs.y = sample_observations(config, &context, &state, &mut rng)?;
        if let Some(NoiseState::Mixture(_)) = &state.noise {
            return Err(Error::param("joint-distribution test supports Gaussian measurement noise only"));
        }
        for (i, s) in statistics(&state, &obs.y).into_iter().enumerate() {
            gibbs[i].push(s);
        }
    }

    let mut res = GewekeResult {
        names: GEWEKE_STATISTICS.to_vec(),
        prior_means: Vec::new(),
        gibbs_means: Vec::new(),
        z_scores: Vec::new(),
    };
    for i in 0..5 {
        let (mp, vp) = mean_var(&forward[i]);
        let mg = gibbs[i].iter().sum::<f64>() / n_samples as f64;
        let vg = batch_means_variance(&gibbs[i], 50);
        let se = (vp + vg).sqrt();
        let z = if se > 0.0 {
            (mg - mp) / se
        } else if mg == mp {
            0.0
        } else {
            f64::INFINITY
        };
        res.prior_means.push(mp);
        res.gibbs_means.push(mg);
        res.z_scores.push(z);
    }
    Ok(res)
}
