//! Measurement noise for the SLDS with C = [I_d 0]: a single inverse-Wishart
//! covariance, or a truncated DP mixture of zero-mean Gaussians.

use rand::Rng;

use super::outer_sum;
use crate::distributions::{sample_beta, sample_inverse_wishart, InverseWishartParams};
use crate::error::{Error, Result};
use crate::hdp::{sample_categorical, stick_breaking};
use crate::linalg::{cholesky, ln_mvn_chol, symmetrize, Mat, Vector};

fn iw_posterior<R: Rng + ?Sized>(
    resid: &[Vector],
    idx: &[usize],
    prior: &InverseWishartParams,
    rng: &mut R,
) -> Result<Mat> {
    let d = prior.dim();
    let s = outer_sum(idx, |t| &resid[t], |t| &resid[t], d, d);
    sample_inverse_wishart(
        &InverseWishartParams {
            dof: prior.dof + idx.len() as f64,
            scale: symmetrize(&(s + &prior.scale)),
        },
        rng,
    )
}

/// Residuals y_t − C x_t with C selecting the first d state coordinates.
pub fn measurement_residuals(y: &[Vector], x: &[Vector]) -> Result<Vec<Vector>> {
    if y.len() != x.len() {
        return Err(Error::param("measurement residuals: y and x lengths differ"));
    }
    y.iter()
        .zip(x)
        .map(|(yt, xt)| {
            if xt.len() < yt.len() {
                Err(Error::param("state dimension smaller than observation dimension"))
            } else {
                Ok(yt - xt.rows(0, yt.len()))
            }
        })
        .collect()
}

/// R ~ IW(T + r0, Σ_t (y_t − Cx_t)(·)ᵀ + R0).
pub fn sample_measurement_noise<R: Rng + ?Sized>(
    y: &[Vector],
    x: &[Vector],
    prior: &InverseWishartParams,
    rng: &mut R,
) -> Result<Mat> {
    let resid = measurement_residuals(y, x)?;
    let idx: Vec<usize> = (0..resid.len()).collect();
    iw_posterior(&resid, &idx, prior, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureNoise {
    pub weights: Vector,
    pub components: Vec<Mat>,
    pub labels: Vec<usize>,
    /// Stick-breaking concentration of the mixture weights.
    pub concentration: f64,
    pub prior: InverseWishartParams,
}

impl MixtureNoise {
    pub fn sample_prior<R: Rng + ?Sized>(
        n_components: usize,
        concentration: f64,
        prior: InverseWishartParams,
        t_len: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let weights = stick_breaking(concentration, n_components, rng)?;
        let components = (0..n_components)
            .map(|_| sample_inverse_wishart(&prior, rng))
            .collect::<Result<Vec<_>>>()?;
        let w: Vec<f64> = weights.iter().copied().collect();
        let labels = (0..t_len).map(|_| sample_categorical(&w, rng)).collect();
        Ok(MixtureNoise {
            weights,
            components,
            labels,
            concentration,
            prior,
        })
    }

    pub fn covariance_at(&self, t: usize) -> &Mat {
        &self.components[self.labels[t]]
    }
}

/// One Gibbs pass: labels | (ω, R_ℓ), then ω | labels (truncated stick
/// posterior), then each R_ℓ | its residuals.
pub fn sample_mixture_measurement_noise<R: Rng + ?Sized>(
    residuals: &[Vector],
    state: &MixtureNoise,
    rng: &mut R,
) -> Result<MixtureNoise> {
    let nc = state.components.len();
    let chols = state
        .components
        .iter()
        .map(|c| cholesky(c, "mixture measurement-noise component"))
        .collect::<Result<Vec<_>>>()?;
    let zero = Vector::zeros(state.prior.dim());
    let ln_w: Vec<f64> = state.weights.iter().map(|w| w.ln()).collect();
    let mut labels = Vec::with_capacity(residuals.len());
    for r in residuals {
        let lw: Vec<f64> = (0..nc).map(|l| ln_w[l] + ln_mvn_chol(r, &zero, &chols[l])).collect();
        labels.push(crate::hdp::sample_log_categorical(&lw, rng)?);
    }
    let mut counts = vec![0usize; nc];
    for &l in &labels {
        counts[l] += 1;
    }
    let mut weights = Vector::zeros(nc);
    let mut rest = 1.0;
    for l in 0..nc {
        let v = if l + 1 == nc {
            1.0
        } else {
            let tail: usize = counts[l + 1..].iter().sum();
            sample_beta(1.0 + counts[l] as f64, state.concentration + tail as f64, rng)?
        };
        weights[l] = rest * v;
        rest -= weights[l];
    }
    let total = weights.sum();
    weights /= total;
    let mut components = Vec::with_capacity(nc);
    for l in 0..nc {
        let idx: Vec<usize> = (0..labels.len()).filter(|&t| labels[t] == l).collect();
        components.push(iw_posterior(residuals, &idx, &state.prior, rng)?);
    }
    Ok(MixtureNoise {
        weights,
        components,
        labels,
        concentration: state.concentration,
        prior: state.prior.clone(),
    })
}
