//! Small dense linear-algebra helpers shared by the samplers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Relative Frobenius-norm asymmetry ||M − Mᵀ|| / ||M||.
pub fn asymmetry(m: &Mat) -> f64 {
    let n = m.norm();
    if n == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / n
}

/// Ratio of largest to smallest absolute eigenvalue of the symmetric part.
pub fn condition_estimate(m: &Mat) -> f64 {
    if m.nrows() == 0 || !m.iter().all(|v| v.is_finite()) {
        return f64::INFINITY;
    }
    let ev = symmetrize(m).symmetric_eigenvalues();
    let max = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = ev.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Cholesky factor of the symmetrized matrix.
///
/// On failure a single jitter of `1e-10·trace/dim` is added to the diagonal;
/// a second failure is reported as a numerical error.
pub fn cholesky(m: &Mat, context: &str) -> Result<Cholesky<f64, Dyn>> {
    if m.nrows() != m.ncols() {
        return Err(Error::param(format!(
            "{context}: expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let s = symmetrize(m);
    if s.iter().all(|v| v.is_finite()) {
        if let Some(c) = s.clone().cholesky() {
            return Ok(c);
        }
        let n = s.nrows().max(1) as f64;
        let jitter = 1e-10 * s.trace().abs() / n;
        if jitter > 0.0 {
            let mut j = s.clone();
            for i in 0..j.nrows() {
                j[(i, i)] += jitter;
            }
            if let Some(c) = j.cholesky() {
                return Ok(c);
            }
        }
    }
    Err(Error::numerical(
        format!("{context}: matrix not positive definite"),
        Some(condition_estimate(&s)),
    ))
}

pub fn is_spd(m: &Mat) -> bool {
    m.nrows() == m.ncols() && symmetrize(m).cholesky().is_some()
}

pub fn spd_inverse(m: &Mat, context: &str) -> Result<Mat> {
    Ok(symmetrize(&cholesky(m, context)?.inverse()))
}

pub fn log_det(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec_cols(m: &Mat) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

pub fn unvec_cols(v: &Vector, nrows: usize, ncols: usize) -> Mat {
    Mat::from_column_slice(nrows, ncols, v.as_slice())
}

pub fn std_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn std_normal_matrix<R: Rng + ?Sized>(r: usize, c: usize, rng: &mut R) -> Mat {
    // Column-major fill keeps the draw order equal to vec order.
    let data: Vec<f64> = (0..r * c).map(|_| rng.sample(StandardNormal)).collect();
    Mat::from_vec(r, c, data)
}

/// Draw from N(mean, cov).
pub fn sample_mvn<R: Rng + ?Sized>(mean: &Vector, cov: &Mat, rng: &mut R) -> Result<Vector> {
    let c = cholesky(cov, "multivariate normal covariance")?;
    Ok(mean + c.l() * std_normal_vector(mean.len(), rng))
}

/// Draw from the Gaussian with precision `lambda` and information vector `theta`.
pub fn sample_info<R: Rng + ?Sized>(theta: &Vector, lambda: &Mat, rng: &mut R) -> Result<Vector> {
    let c = cholesky(lambda, "information-form precision")?;
    let mean = c.solve(theta);
    // Λ = L Lᵀ, so L⁻ᵀ z has covariance Λ⁻¹.
    let z = std_normal_vector(theta.len(), rng);
    let dev = c
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::numerical("information-form sample", None))?;
    Ok(mean + dev)
}

/// Log density of N(x; mean, LLᵀ) given the Cholesky factor of the covariance.
pub fn ln_mvn_chol(x: &Vector, mean: &Vector, chol: &Cholesky<f64, Dyn>) -> f64 {
    let r = x - mean;
    let w = chol
        .l_dirty()
        .solve_lower_triangular(&r)
        .unwrap_or_else(|| Vector::from_element(r.len(), f64::NAN));
    let d = r.len() as f64;
    -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + log_det(chol) + w.norm_squared())
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
