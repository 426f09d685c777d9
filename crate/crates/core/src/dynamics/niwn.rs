//! Independent normal / inverse-Wishart / normal priors on A, Σ and μ.
//!
//! Used whenever (A, Σ) cannot share a conjugate MNIW prior: a dynamic matrix
//! shared across modes, a fixed A with switching noise mean, or a separate
//! prior on the process-noise mean.

use rand::Rng;

use super::{outer_sum, ModeDynamics, PseudoObsRegression};
use crate::distributions::{sample_inverse_wishart, InformationGaussian, InverseWishartParams};
use crate::error::{Error, Result};
use crate::linalg::{is_spd, spd_inverse, unvec_cols, vec_cols, Mat, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct NormalPrior {
    pub mean: Vector,
    pub cov: Mat,
}

impl NormalPrior {
    pub fn validate(&self, dim: usize, what: &str) -> Result<()> {
        if self.mean.len() != dim || self.cov.nrows() != dim || self.cov.ncols() != dim {
            return Err(Error::param(format!("{what} prior must have dimension {dim}")));
        }
        if !is_spd(&self.cov) {
            return Err(Error::param(format!("{what} prior covariance must be positive definite")));
        }
        Ok(())
    }

    /// (Σ₀⁻¹μ₀, Σ₀⁻¹)
    pub fn info(&self) -> Result<(Vector, Mat)> {
        let prec = spd_inverse(&self.cov, "normal prior covariance")?;
        Ok((&prec * &self.mean, prec))
    }
}

/// Information-form conditional of vec(A) (A is `rows`×`cols`) pooling every
/// listed mode with its own Σ and μ, on top of the given prior information.
pub fn a_posterior_info(
    reg: &PseudoObsRegression,
    modes: &[(usize, &Mat, Option<&Vector>)],
    rows: usize,
    cols: usize,
    prior_prec: &Mat,
    prior_theta: &Vector,
) -> Result<InformationGaussian> {
    let dim = rows * cols;
    if prior_prec.nrows() != dim || prior_theta.len() != dim {
        return Err(Error::param("dynamic-matrix prior has wrong dimension"));
    }
    let mut lambda = prior_prec.clone();
    let mut theta = prior_theta.clone();
    for &(k, sigma, mu) in modes {
        let idx: Vec<usize> = reg.indices_of(k).collect();
        if idx.is_empty() {
            continue;
        }
        let sinv = spd_inverse(sigma, "process noise covariance")?;
        let resid: Vec<Vector> = idx
            .iter()
            .map(|&t| match mu {
                Some(mu) => &reg.psi[t] - mu,
                None => reg.psi[t].clone(),
            })
            .collect();
        let pos: Vec<usize> = (0..idx.len()).collect();
        let s_bb = outer_sum(&idx, |t| &reg.psibar[t], |t| &reg.psibar[t], cols, cols);
        let s_rb = outer_sum(&pos, |i| &resid[i], |i| &reg.psibar[idx[i]], rows, cols);
        lambda += s_bb.kronecker(&sinv);
        theta += vec_cols(&(&sinv * s_rb));
    }
    InformationGaussian::new(theta, lambda)
}

/// Shared A across all modes, A ~ N(prior) on vec(A).
pub fn sample_shared_a_niwn<R: Rng + ?Sized>(
    reg: &PseudoObsRegression,
    dynamics: &[ModeDynamics],
    prior: &NormalPrior,
    rng: &mut R,
) -> Result<Mat> {
    let (rows, cols) = match dynamics.first() {
        Some(d) => (d.a.nrows(), d.a.ncols()),
        None => return Err(Error::param("shared dynamic matrix needs at least one mode")),
    };
    let (pt, pp) = prior.info()?;
    let modes: Vec<(usize, &Mat, Option<&Vector>)> = dynamics
        .iter()
        .enumerate()
        .map(|(k, d)| (k, &d.sigma, d.mu.as_ref()))
        .collect();
    let post = a_posterior_info(reg, &modes, rows, cols, &pp, &pt)?;
    let v = post.sample(rng).map_err(|e| e.within("shared dynamic matrix"))?;
    Ok(unvec_cols(&v, rows, cols))
}

/// Σ ~ IW(n_k + n0, S0 + Σ_t r_t r_tᵀ) with r_t = ψ_t − Aψ̄_t − μ.
pub fn sample_sigma_given_a<R: Rng + ?Sized>(
    reg: &PseudoObsRegression,
    k: usize,
    a: &Mat,
    mu: Option<&Vector>,
    iw: &InverseWishartParams,
    rng: &mut R,
) -> Result<Mat> {
    let idx: Vec<usize> = reg.indices_of(k).collect();
    let resid: Vec<Vector> = idx.iter().map(|&t| reg.residual(t, a, mu)).collect();
    let pos: Vec<usize> = (0..idx.len()).collect();
    let l = iw.dim();
    let s = outer_sum(&pos, |i| &resid[i], |i| &resid[i], l, l);
    let post = InverseWishartParams {
        dof: iw.dof + idx.len() as f64,
        scale: crate::linalg::symmetrize(&(s + &iw.scale)),
    };
    sample_inverse_wishart(&post, rng)
}

/// μ | A, Σ ~ N⁻¹(Σ₀⁻¹μ₀ + Σ⁻¹ Σ_t(ψ_t − Aψ̄_t), Σ₀⁻¹ + n_k Σ⁻¹).
pub fn process_mean_posterior(
    reg: &PseudoObsRegression,
    k: usize,
    a: &Mat,
    sigma: &Mat,
    prior: &NormalPrior,
) -> Result<InformationGaussian> {
    let (mut theta, mut lambda) = prior.info()?;
    let idx: Vec<usize> = reg.indices_of(k).collect();
    if !idx.is_empty() {
        let sinv = spd_inverse(sigma, "process noise covariance")?;
        let mut sum = Vector::zeros(theta.len());
        for &t in &idx {
            sum += reg.residual(t, a, None);
        }
        theta += &sinv * sum;
        lambda += sinv * idx.len() as f64;
    }
    InformationGaussian::new(theta, lambda)
}

pub fn sample_process_mean<R: Rng + ?Sized>(
    reg: &PseudoObsRegression,
    k: usize,
    a: &Mat,
    sigma: &Mat,
    prior: &NormalPrior,
    rng: &mut R,
) -> Result<Vector> {
    process_mean_posterior(reg, k, a, sigma, prior)?
        .sample(rng)
        .map_err(|e| e.within("process-noise mean"))
}
