use rand::Rng;

use super::config::{ModelConfig, Observations, PriorFamily, Sharing};
use super::state::{pseudo_observations, sample_states, ChainState, NoiseState};
use crate::dynamics::{
    a_posterior_info, measurement_residuals, mniw_sufficient_stats, sample_ard_dynamic_matrix,
    sample_ard_precisions, sample_measurement_noise, sample_mixture_measurement_noise, sample_mniw_posterior,
    sample_process_mean, sample_shared_a_niwn, sample_sigma_given_a, PseudoObsRegression,
};
use crate::error::{Error, Result};
use crate::hdp::resample_transitions;
use crate::linalg::unvec_cols;
use crate::modes::{block_sample_modes, sequential_sample_modes_marginalized};
use crate::states::local_evidence;

/// Switches for deliberately altering the kernel, used to check that the
/// joint-distribution test has power.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepControl {
    pub skip_beta_update: bool,
}

pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: ChainState,
    config: &ModelConfig,
    data: &Observations,
    rng: &mut R,
) -> Result<ChainState> {
    gibbs_sweep_with(state, config, data, SweepControl::default(), rng)
}

pub fn gibbs_sweep_with<R: Rng + ?Sized>(
    mut state: ChainState,
    config: &ModelConfig,
    data: &Observations,
    control: SweepControl,
    rng: &mut R,
) -> Result<ChainState> {
    let iter = state.iteration + 1;
    let at = move |step: &str| format!("iteration {iter}, {step}");
    let sup = config.supervision.as_deref();

    if config.is_slds() {
        let noise = state
            .noise
            .as_ref()
            .ok_or_else(|| Error::param("SLDS chain state has no measurement noise"))?;
        let period = config.schedule.sequential_period;
        if period > 0 && iter % period == 0 {
            let local = local_evidence(&data.y, config.shape.psi_dim(), &noise.covariances())?;
            state.z = sequential_sample_modes_marginalized(
                &local,
                &state.z,
                &state.trans,
                &state.dynamics,
                &config.initial_state_cov(),
                sup,
                rng,
            )
            .map_err(|e| e.within(at("sequential mode step")))?;
        }
        let x = sample_states(config, data, &state.z, &state.dynamics, noise, rng)
            .map_err(|e| e.within(at("state sequence")))?;
        state.states = Some(x);
    }

    let reg = pseudo_observations(config, data, &state)?;
    let (z, counts) = block_sample_modes(&reg, &state.trans, &state.dynamics, sup, rng)
        .map_err(|e| e.within(at("mode sequence")))?;
    state.z = z;

    let (trans, hyper) = resample_transitions(
        &counts,
        &state.trans,
        &state.hyper,
        &config.hdp,
        !control.skip_beta_update,
        rng,
    )
    .map_err(|e| e.within(at("transition distributions")))?;
    state.trans = trans;
    state.hyper = hyper;

    let reg = PseudoObsRegression {
        assignments: state.z.clone(),
        ..reg
    };
    update_dynamics(&reg, &mut state, config, rng).map_err(|e| e.within(at("dynamic parameters")))?;

    if config.is_slds() {
        update_noise(&mut state, config, data, rng).map_err(|e| e.within(at("measurement noise")))?;
    }
    state.iteration = iter;
    Ok(state)
}

/// Resample every mode's (A, Σ, μ) and ARD precisions given the pseudo-observations.
pub fn update_dynamics<R: Rng + ?Sized>(
    reg: &PseudoObsRegression,
    state: &mut ChainState,
    config: &ModelConfig,
    rng: &mut R,
) -> Result<()> {
    let h = &config.hypers;
    let inner = config.schedule.inner_iterations;
    let iw = h.mniw.iw();
    let (l, m) = (config.shape.psi_dim(), config.shape.regressor_dim());
    match config.prior {
        PriorFamily::Mniw => {
            for k in 0..state.dynamics.len() {
                let mu = state.dynamics[k].mu.clone();
                let Some(mut mu) = mu else {
                    let stats = mniw_sufficient_stats(reg, k, &h.mniw, None)?;
                    state.dynamics[k] = sample_mniw_posterior(&stats, &h.mniw, rng)?;
                    continue;
                };
                for _ in 0..inner {
                    let stats = mniw_sufficient_stats(reg, k, &h.mniw, Some(&mu))?;
                    let dk = sample_mniw_posterior(&stats, &h.mniw, rng)?;
                    mu = sample_process_mean(reg, k, &dk.a, &dk.sigma, &h.process_mean, rng)?;
                    state.dynamics[k] = dk;
                    state.dynamics[k].mu = Some(mu.clone());
                }
            }
        }
        PriorFamily::Ard => {
            for k in 0..state.dynamics.len() {
                for _ in 0..inner {
                    let dk = &mut state.dynamics[k];
                    let ard = &mut state.ard[k];
                    dk.a = sample_ard_dynamic_matrix(reg, k, &dk.sigma, ard, dk.mu.as_ref(), rng)?;
                    ard.alphas = sample_ard_precisions(&dk.a, ard, rng)?;
                    dk.sigma = sample_sigma_given_a(reg, k, &dk.a, dk.mu.as_ref(), &iw, rng)?;
                    if dk.mu.is_some() {
                        dk.mu = Some(sample_process_mean(reg, k, &dk.a, &dk.sigma, &h.process_mean, rng)?);
                    }
                }
            }
        }
        PriorFamily::Niwn => {
            let (pt, pp) = h.a_prior.info()?;
            for _ in 0..inner {
                match &config.sharing {
                    Sharing::PerMode => {
                        for k in 0..state.dynamics.len() {
                            let dk = &state.dynamics[k];
                            let post = a_posterior_info(reg, &[(k, &dk.sigma, dk.mu.as_ref())], l, m, &pp, &pt)?;
                            let a = unvec_cols(&post.sample(rng)?, l, m);
                            state.dynamics[k].a = a;
                        }
                    }
                    Sharing::Shared => {
                        let a = sample_shared_a_niwn(reg, &state.dynamics, &h.a_prior, rng)?;
                        for dk in &mut state.dynamics {
                            dk.a = a.clone();
                        }
                    }
                    Sharing::Fixed(_) => {}
                }
                for k in 0..state.dynamics.len() {
                    let dk = &mut state.dynamics[k];
                    dk.sigma = sample_sigma_given_a(reg, k, &dk.a, dk.mu.as_ref(), &iw, rng)?;
                    if dk.mu.is_some() {
                        dk.mu = Some(sample_process_mean(reg, k, &dk.a, &dk.sigma, &h.process_mean, rng)?);
                    }
                }
            }
        }
    }
    Ok(())
}

fn update_noise<R: Rng + ?Sized>(
    state: &mut ChainState,
    config: &ModelConfig,
    data: &Observations,
    rng: &mut R,
) -> Result<()> {
    let x = &state
        .states
        .as_ref()
        .ok_or_else(|| Error::param("SLDS chain state has no continuous states"))?
        .x;
    let next = match state.noise.take() {
        Some(NoiseState::Gaussian(_)) => {
            let prior = config
                .hypers
                .measurement
                .as_ref()
                .ok_or_else(|| Error::param("SLDS needs a measurement-noise prior"))?;
            NoiseState::Gaussian(sample_measurement_noise(&data.y, x, prior, rng)?)
        }
        Some(NoiseState::Mixture(mix)) => {
            let resid = measurement_residuals(&data.y, x)?;
            NoiseState::Mixture(sample_mixture_measurement_noise(&resid, &mix, rng)?)
        }
        None => return Err(Error::param("SLDS chain state has no measurement noise")),
    };
    state.noise = Some(next);
    Ok(())
}
