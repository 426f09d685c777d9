use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, Observations};
use super::joint::{log_joint, rows_of};
use super::state::{ChainState, NoiseState};
use super::sweep::{gibbs_sweep_with, SweepControl};
use crate::dynamics::ModeDynamics;
use crate::error::{Error, Result};
use crate::hdp::TransitionSet;
use crate::linalg::{Mat, Vector};
use crate::rng::chain_rng;

/// Fraction of time steps a mode must hold to count as active.
pub const ACTIVE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    /// 1-based mode label.
    pub label: usize,
    pub occupancy: usize,
    pub a: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    #[serde(default)]
    pub mu: Option<Vec<f64>>,
    #[serde(default)]
    pub ard_precisions: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSummary {
    pub weights: Vec<f64>,
    pub components: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub chain: usize,
    /// Sweeps completed when the record was taken.
    pub iteration: usize,
    pub burn_in: bool,
    /// 1-based mode labels.
    pub z: Vec<usize>,
    pub active_modes: usize,
    pub log_joint: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub beta: Vec<f64>,
    pub pi: Vec<Vec<f64>>,
    pub modes: Vec<ModeSummary>,
    #[serde(default)]
    pub measurement_noise: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub mixture: Option<MixtureSummary>,
}

fn mat_from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, |v| v.len());
    if rows.iter().any(|v| v.len() != c) {
        return Err(Error::param("ragged matrix in trace record"));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

impl TraceRecord {
    pub fn from_state(chain: usize, state: &ChainState, config: &ModelConfig, data: &Observations) -> Result<Self> {
        let mut occ = vec![0usize; state.dynamics.len()];
        for &k in &state.z {
            occ[k] += 1;
        }
        let modes = state
            .dynamics
            .iter()
            .enumerate()
            .map(|(k, d)| ModeSummary {
                label: k + 1,
                occupancy: occ[k],
                a: rows_of(&d.a),
                sigma: rows_of(&d.sigma),
                mu: d.mu.as_ref().map(|m| m.iter().copied().collect()),
                ard_precisions: state.ard.get(k).map(|a| a.alphas.clone()),
            })
            .collect();
        let (measurement_noise, mixture) = match &state.noise {
            Some(NoiseState::Gaussian(r)) => (Some(rows_of(r)), None),
            Some(NoiseState::Mixture(m)) => (
                None,
                Some(MixtureSummary {
                    weights: m.weights.iter().copied().collect(),
                    components: m.components.iter().map(rows_of).collect(),
                }),
            ),
            None => (None, None),
        };
        Ok(TraceRecord {
            chain,
            iteration: state.iteration,
            burn_in: state.iteration <= config.schedule.burn_in,
            z: state.z.iter().map(|k| k + 1).collect(),
            active_modes: state.active_modes(ACTIVE_FRACTION),
            log_joint: log_joint(state, config, data)?,
            alpha: state.hyper.alpha,
            gamma: state.hyper.gamma,
            kappa: state.hyper.kappa,
            beta: state.trans.beta.iter().copied().collect(),
            pi: rows_of(&state.trans.pi),
            modes,
            measurement_noise,
            mixture,
        })
    }

    /// Mode labels shifted back to 0-based.
    pub fn modes_zero_based(&self) -> Vec<usize> {
        self.z.iter().map(|&k| k.saturating_sub(1)).collect()
    }

    pub fn transitions(&self) -> Result<TransitionSet> {
        let t = TransitionSet {
            beta: Vector::from_vec(self.beta.clone()),
            pi: mat_from_rows(&self.pi)?,
        };
        t.check()?;
        Ok(t)
    }

    pub fn dynamics(&self) -> Result<Vec<ModeDynamics>> {
        self.modes
            .iter()
            .map(|m| {
                Ok(ModeDynamics {
                    a: mat_from_rows(&m.a)?,
                    sigma: mat_from_rows(&m.sigma)?,
                    mu: m.mu.clone().map(Vector::from_vec),
                })
            })
            .collect()
    }

    /// Per-step measurement covariances for an SLDS record (one entry if shared).
    pub fn measurement_covariances(&self) -> Result<Option<Vec<Mat>>> {
        match (&self.measurement_noise, &self.mixture) {
            (Some(r), _) => Ok(Some(vec![mat_from_rows(r)?])),
            (None, Some(_)) => Err(Error::param(
                "mixture measurement noise records do not keep per-step labels",
            )),
            (None, None) => Ok(None),
        }
    }
}

/// Run one chain from its prior initialization, handing every stored record to `sink`.
pub fn run_chain_with<R: Rng + ?Sized>(
    config: &ModelConfig,
    data: &Observations,
    chain: usize,
    control: SweepControl,
    rng: &mut R,
    mut sink: impl FnMut(TraceRecord) -> Result<()>,
) -> Result<ChainState> {
    let mut state = ChainState::initialize(config, data, rng).map_err(|e| e.within(format!("chain {chain} initialization")))?;
    for it in 0..config.schedule.iterations {
        state = gibbs_sweep_with(state, config, data, control, rng).map_err(|e| e.within(format!("chain {chain}")))?;
        if config.schedule.records(it) {
            sink(TraceRecord::from_state(chain, &state, config, data)?)?;
        }
    }
    Ok(state)
}

/// Independent chains seeded by (seed, chain index), run in parallel.
pub fn run_chains(
    config: &ModelConfig,
    data: &Observations,
    n_chains: usize,
    seed: u64,
) -> Result<Vec<Vec<TraceRecord>>> {
    (0..n_chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = chain_rng(seed, c as u64);
            let mut out = Vec::new();
            run_chain_with(config, data, c, SweepControl::default(), &mut rng, |r| {
                out.push(r);
                Ok(())
            })?;
            Ok(out)
        })
        .collect()
}
