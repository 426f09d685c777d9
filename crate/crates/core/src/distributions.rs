//! Random variates and log densities for the families used by the samplers,
//! plus information-form Gaussian algebra.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{
    asymmetry, cholesky, condition_estimate, log_det, spd_inverse, std_normal_matrix, symmetrize,
    Mat, Vector,
};

/// Gaussian in information form: ϑ = Σ⁻¹μ, Λ = Σ⁻¹.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationGaussian {
    pub theta: Vector,
    pub lambda: Mat,
}

impl InformationGaussian {
    pub fn new(theta: Vector, lambda: Mat) -> Result<Self> {
        if lambda.nrows() != lambda.ncols() || lambda.nrows() != theta.len() {
            return Err(Error::param(format!(
                "information gaussian: theta has length {}, lambda is {}x{}",
                theta.len(),
                lambda.nrows(),
                lambda.ncols()
            )));
        }
        Ok(InformationGaussian {
            theta,
            lambda: symmetrize(&lambda),
        })
    }

    /// Zero-information (flat) element of dimension `n`.
    pub fn flat(n: usize) -> Self {
        InformationGaussian {
            theta: Vector::zeros(n),
            lambda: Mat::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Product of two Gaussian factors.
    pub fn combine(&self, other: &InformationGaussian) -> InformationGaussian {
        InformationGaussian {
            theta: &self.theta + &other.theta,
            lambda: symmetrize(&(&self.lambda + &other.lambda)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vector> {
        crate::linalg::sample_info(&self.theta, &self.lambda, rng)
    }
}

pub fn info_to_moment(g: &InformationGaussian) -> Result<(Vector, Mat)> {
    let c = cholesky(&g.lambda, "information to moment conversion").map_err(|_| {
        Error::numerical(
            "information to moment conversion: singular precision",
            Some(condition_estimate(&g.lambda)),
        )
    })?;
    let mean = c.solve(&g.theta);
    Ok((mean, symmetrize(&c.inverse())))
}

pub fn moment_to_info(mean: &Vector, cov: &Mat) -> Result<InformationGaussian> {
    if cov.nrows() != mean.len() {
        return Err(Error::param("moment to information conversion: dimension mismatch"));
    }
    let c = cholesky(cov, "moment to information conversion").map_err(|_| {
        Error::numerical(
            "moment to information conversion: singular covariance",
            Some(condition_estimate(cov)),
        )
    })?;
    let lambda = symmetrize(&c.inverse());
    let theta = c.solve(mean);
    InformationGaussian::new(theta, lambda)
}

/// Matrix-normal law: vec(X) ~ N(vec(M), V ⊗ Sigma) with column stacking.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixNormalParams {
    pub m: Mat,
    /// Column covariance (d_in × d_in).
    pub v: Mat,
    /// Row covariance (d_out × d_out).
    pub sigma: Mat,
}

impl MatrixNormalParams {
    pub fn new(m: Mat, v: Mat, sigma: Mat) -> Result<Self> {
        if v.nrows() != m.ncols() || v.ncols() != m.ncols() {
            return Err(Error::param("matrix normal: V must be d_in x d_in"));
        }
        if sigma.nrows() != m.nrows() || sigma.ncols() != m.nrows() {
            return Err(Error::param("matrix normal: Sigma must be d_out x d_out"));
        }
        Ok(MatrixNormalParams { m, v, sigma })
    }
}

pub fn sample_matrix_normal<R: Rng + ?Sized>(p: &MatrixNormalParams, rng: &mut R) -> Result<Mat> {
    let lv = cholesky(&p.v, "matrix normal V").map_err(to_param)?;
    let ls = cholesky(&p.sigma, "matrix normal Sigma").map_err(to_param)?;
    let z = std_normal_matrix(p.m.nrows(), p.m.ncols(), rng);
    Ok(&p.m + ls.l() * z * lv.l().transpose())
}

/// Log density of the matrix normal.
pub fn ln_matrix_normal(x: &Mat, p: &MatrixNormalParams) -> Result<f64> {
    let lv = cholesky(&p.v, "matrix normal V")?;
    let ls = cholesky(&p.sigma, "matrix normal Sigma")?;
    let (d, m) = (p.m.nrows() as f64, p.m.ncols() as f64);
    let r = x - &p.m;
    // tr(V⁻¹ Rᵀ Σ⁻¹ R)
    let q = (r.transpose() * ls.solve(&r)).transpose();
    let quad = lv.solve(&q).trace();
    Ok(-0.5
        * (d * m * (2.0 * std::f64::consts::PI).ln() + d * log_det(&lv) + m * log_det(&ls) + quad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseWishartParams {
    pub dof: f64,
    pub scale: Mat,
}

impl InverseWishartParams {
    pub fn new(dof: f64, scale: Mat) -> Result<Self> {
        let p = InverseWishartParams { dof, scale };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.scale.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.scale.nrows();
        if self.scale.ncols() != dim || dim == 0 {
            return Err(Error::param("inverse Wishart scale must be square and non-empty"));
        }
        if !(self.dof > dim as f64 - 1.0) || !self.dof.is_finite() {
            return Err(Error::param(format!(
                "inverse Wishart dof {} must exceed dim - 1 = {}",
                self.dof,
                dim as f64 - 1.0
            )));
        }
        if !crate::linalg::is_spd(&self.scale) {
            return Err(Error::param("inverse Wishart scale is not positive definite"));
        }
        Ok(())
    }

    /// E[X] = scale / (dof − dim − 1), defined for dof > dim + 1.
    pub fn mean(&self) -> Option<Mat> {
        let denom = self.dof - self.dim() as f64 - 1.0;
        (denom > 0.0).then(|| &self.scale / denom)
    }
}

/// Inverse-Wishart draw via the Bartlett decomposition of the matching Wishart.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(
    p: &InverseWishartParams,
    rng: &mut R,
) -> Result<Mat> {
    let dim = p.scale.nrows();
    if p.scale.ncols() != dim || dim == 0 || !(p.dof > dim as f64 - 1.0) {
        return Err(Error::param(format!(
            "inverse Wishart dof {} must exceed dim - 1 = {}",
            p.dof,
            dim as f64 - 1.0
        )));
    }
    let l = cholesky(&p.scale, "inverse Wishart scale").map_err(to_param)?;
    // W ~ Wishart(dof, S⁻¹) = F B Bᵀ Fᵀ with F = L⁻ᵀ; X = W⁻¹ = (B⁻¹Lᵀ)ᵀ(B⁻¹Lᵀ).
    let mut b = Mat::zeros(dim, dim);
    for i in 0..dim {
        let chi2 = 2.0 * sample_gamma_unit((p.dof - i as f64) / 2.0, rng)?;
        b[(i, i)] = chi2.sqrt();
        for j in 0..i {
            b[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let g = b
        .solve_lower_triangular(&l.l().transpose())
        .ok_or_else(|| Error::numerical("inverse Wishart Bartlett factor", None))?;
    let x = symmetrize(&(g.transpose() * g));
    // The result must itself survive the PD check used downstream.
    cholesky(&x, "inverse Wishart draw")?;
    Ok(x)
}

/// ln Γ_p(a), the multivariate gamma function.
pub fn ln_multigamma(p: usize, a: f64) -> f64 {
    let pf = p as f64;
    pf * (pf - 1.0) / 4.0 * std::f64::consts::PI.ln()
        + (0..p).map(|j| ln_gamma(a - j as f64 / 2.0)).sum::<f64>()
}

pub fn ln_inverse_wishart(x: &Mat, p: &InverseWishartParams) -> Result<f64> {
    let dim = p.dim();
    let lx = cholesky(x, "inverse Wishart density argument")?;
    let ls = cholesky(&p.scale, "inverse Wishart density scale")?;
    let tr = lx.solve(&p.scale).trace();
    let nu = p.dof;
    Ok(0.5 * nu * log_det(&ls)
        - 0.5 * nu * dim as f64 * 2f64.ln()
        - ln_multigamma(dim, nu / 2.0)
        - 0.5 * (nu + dim as f64 + 1.0) * log_det(&lx)
        - 0.5 * tr)
}

/// Normal-inverse-Wishart: Σ ~ IW(iw), μ | Σ ~ N(mu0, Σ/kappa0).
pub fn sample_niw<R: Rng + ?Sized>(
    mu0: &Vector,
    kappa0: f64,
    iw: &InverseWishartParams,
    rng: &mut R,
) -> Result<(Vector, Mat)> {
    if !(kappa0 > 0.0) {
        return Err(Error::param("normal-inverse-Wishart kappa0 must be positive"));
    }
    if mu0.len() != iw.dim() {
        return Err(Error::param("normal-inverse-Wishart mean has wrong dimension"));
    }
    let sigma = sample_inverse_wishart(iw, rng)?;
    let mu = crate::linalg::sample_mvn(mu0, &(&sigma / kappa0), rng)?;
    Ok((mu, sigma))
}

fn to_param(e: Error) -> Error {
    match e {
        Error::Numerical { context, .. } => Error::Parameter(context),
        other => other,
    }
}

fn sample_gamma_unit<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64> {
    Gamma::new(shape, 1.0)
        .map(|g| g.sample(rng))
        .map_err(|_| Error::param(format!("gamma shape {shape} must be positive and finite")))
}

/// Gamma(shape, rate) draw (mean shape/rate).
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
        return Err(Error::param(format!(
            "gamma shape {shape} and rate {rate} must be positive"
        )));
    }
    Ok(sample_gamma_unit(shape, rng)? / rate)
}

/// ln of a unit-rate Gamma(shape) draw, accurate for arbitrarily small shapes
/// where the draw itself would underflow to zero.
pub fn sample_ln_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(Error::param(format!("gamma shape {shape} must be positive")));
    }
    if shape >= 1.0 {
        return Ok(sample_gamma_unit(shape, rng)?.ln());
    }
    let g = sample_gamma_unit(shape + 1.0, rng)?;
    let u: f64 = 1.0 - rng.gen::<f64>();
    Ok(g.ln() + u.ln() / shape)
}

pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    Ok(sample_ln_beta(a, b, rng)?.0.exp())
}

/// (ln x, ln(1 − x)) for x ~ Beta(a, b), stable for tiny parameters.
pub fn sample_ln_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<(f64, f64)> {
    let la = sample_ln_gamma(a, rng)?;
    let lb = sample_ln_gamma(b, rng)?;
    let m = la.max(lb);
    let lse = m + ((la - m).exp() + (lb - m).exp()).ln();
    Ok((la - lse, lb - lse))
}

pub fn sample_dirichlet<R: Rng + ?Sized>(conc: &[f64], rng: &mut R) -> Result<Vector> {
    if conc.is_empty() {
        return Err(Error::param("Dirichlet needs at least one component"));
    }
    let logs = conc
        .iter()
        .map(|&c| sample_ln_gamma(c, rng))
        .collect::<Result<Vec<f64>>>()?;
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    Ok(Vector::from_iterator(w.len(), w.iter().map(|v| v / s)))
}

pub fn ln_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

pub fn ln_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return f64::NEG_INFINITY;
    }
    let (lx, l1x) = (x.max(1e-300).ln(), (1.0 - x).max(1e-300).ln());
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * lx + (b - 1.0) * l1x
}

/// Dirichlet log density with entries floored at 1e-300, so weak-limit draws
/// whose tiny components underflowed still give a finite value.
pub fn ln_dirichlet_pdf(x: &[f64], conc: &[f64]) -> f64 {
    let s: f64 = conc.iter().sum();
    ln_gamma(s)
        + x.iter()
            .zip(conc)
            .map(|(&xi, &c)| (c - 1.0) * xi.max(1e-300).ln() - ln_gamma(c))
            .sum::<f64>()
}

pub fn ln_mvn(x: &Vector, mean: &Vector, cov: &Mat) -> Result<f64> {
    let c = cholesky(cov, "normal density covariance")?;
    Ok(crate::linalg::ln_mvn_chol(x, mean, &c))
}

/// Inverse of an SPD matrix, re-exported for the dynamics modules.
pub fn inverse_spd(m: &Mat, context: &str) -> Result<Mat> {
    spd_inverse(m, context)
}

/// Check used by tests and debug assertions: symmetric to 1e-10 and Cholesky-factorable.
pub fn is_symmetric_pd(m: &Mat) -> bool {
    asymmetry(m) <= 1e-10 && crate::linalg::is_spd(m)
}
