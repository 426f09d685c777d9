//! Priors and conditional posteriors for the mode-specific dynamics
//! ψ_t = A^(k) ψ̄_t + μ^(k) + e_t, e_t ~ N(0, Σ^(k)), and for the measurement noise.

mod ard;
mod sparsity;
mod hyper;
mod mniw;
mod niwn;
mod noise;

pub use ard::{ard_posterior, sample_ard_dynamic_matrix, sample_ard_precisions, ArdState};
pub use sparsity::{columns_zero_in_some_mode, observation_preserves_sparsity, zero_column_pattern};
pub use hyper::{set_hyperparameters_from_data, DataHypers, HyperPreset, ModelShape};
pub use mniw::{
    mniw_posterior, mniw_sufficient_stats, sample_mniw_posterior, sample_mniw_prior, MniwHyper,
    MniwStats,
};
pub use niwn::{
    a_posterior_info, process_mean_posterior, sample_process_mean, sample_shared_a_niwn,
    sample_sigma_given_a, NormalPrior,
};
pub use noise::{
    measurement_residuals, sample_measurement_noise, sample_mixture_measurement_noise, MixtureNoise,
};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

/// Aligned pseudo-observation pairs (ψ_t, ψ̄_t) with their mode labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObsRegression {
    pub psi: Vec<Vector>,
    pub psibar: Vec<Vector>,
    pub assignments: Vec<usize>,
}

impl PseudoObsRegression {
    pub fn new(psi: Vec<Vector>, psibar: Vec<Vector>, assignments: Vec<usize>) -> Result<Self> {
        if psi.len() != psibar.len() || psi.len() != assignments.len() {
            return Err(Error::param(format!(
                "pseudo-observations misaligned: {} psi, {} psibar, {} labels",
                psi.len(),
                psibar.len(),
                assignments.len()
            )));
        }
        if let (Some(p), Some(pb)) = (psi.first(), psibar.first()) {
            let (l, m) = (p.len(), pb.len());
            if psi.iter().any(|v| v.len() != l) || psibar.iter().any(|v| v.len() != m) {
                return Err(Error::param("pseudo-observations have ragged dimensions"));
            }
        }
        Ok(PseudoObsRegression {
            psi,
            psibar,
            assignments,
        })
    }

    /// Stacked AR regressors ψ̄_t = [y_{t−1}; …; y_{t−r}], with `context` holding y_{1−r..0}.
    pub fn autoregressive(
        context: &[Vector],
        y: &[Vector],
        order: usize,
        assignments: Vec<usize>,
    ) -> Result<Self> {
        if context.len() < order {
            return Err(Error::param(format!(
                "AR({order}) needs {order} context observations, got {}",
                context.len()
            )));
        }
        let ctx = &context[context.len() - order..];
        let d = y.first().or(ctx.first()).map_or(0, |v| v.len());
        let at = |s: isize| -> &Vector {
            if s < 0 {
                &ctx[(order as isize + s) as usize]
            } else {
                &y[s as usize]
            }
        };
        let psibar = (0..y.len())
            .map(|t| {
                let mut v = Vector::zeros(d * order);
                for lag in 1..=order {
                    v.rows_mut((lag - 1) * d, d)
                        .copy_from(at(t as isize - lag as isize));
                }
                v
            })
            .collect();
        Self::new(y.to_vec(), psibar, assignments)
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn indices_of(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignments
            .iter()
            .enumerate()
            .filter(move |(_, &z)| z == k)
            .map(|(t, _)| t)
    }

    pub fn count(&self, k: usize) -> usize {
        self.assignments.iter().filter(|&&z| z == k).count()
    }

    /// Residual ψ_t − Aψ̄_t − μ.
    pub fn residual(&self, t: usize, a: &Mat, mu: Option<&Vector>) -> Vector {
        let mut r = &self.psi[t] - a * &self.psibar[t];
        if let Some(mu) = mu {
            r -= mu;
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeDynamics {
    pub a: Mat,
    pub sigma: Mat,
    pub mu: Option<Vector>,
}

impl ModeDynamics {
    pub fn predict(&self, psibar: &Vector) -> Vector {
        let mut m = &self.a * psibar;
        if let Some(mu) = &self.mu {
            m += mu;
        }
        m
    }

    pub fn mu_or_zero(&self) -> Vector {
        self.mu
            .clone()
            .unwrap_or_else(|| Vector::zeros(self.sigma.nrows()))
    }
}

/// Sum of outer products Σ_t a_t b_tᵀ over the given indices.
pub(crate) fn outer_sum<'a>(
    idx: &[usize],
    a: impl Fn(usize) -> &'a Vector,
    b: impl Fn(usize) -> &'a Vector,
    ra: usize,
    rb: usize,
) -> Mat {
    if idx.is_empty() {
        return Mat::zeros(ra, rb);
    }
    let am = Mat::from_fn(ra, idx.len(), |i, j| a(idx[j])[i]);
    let bm = Mat::from_fn(rb, idx.len(), |i, j| b(idx[j])[i]);
    am * bm.transpose()
}
