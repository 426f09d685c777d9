//! Automatic relevance determination: vec(A) ~ N(0, Σ₀) with
//! Σ₀ = diag(α_g)⁻¹ per column group, α_g ~ Gamma(a, b).
//!
//! Groups are the columns of A for the SLDS and the d×d lag blocks for
//! VAR(r), so |S_g| is n or d² respectively.

use rand::Rng;

use super::niwn::a_posterior_info;
use super::PseudoObsRegression;
use crate::distributions::{sample_gamma, InformationGaussian};
use crate::error::{Error, Result};
use crate::linalg::{unvec_cols, Mat, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct ArdState {
    pub alphas: Vec<f64>,
    pub a: f64,
    pub b: f64,
    /// Group index of each column of A; every entry (i, j) belongs to group `column_group[j]`.
    pub column_group: Vec<usize>,
    pub rows: usize,
}

impl ArdState {
    fn with_groups(rows: usize, column_group: Vec<usize>) -> Self {
        let groups = column_group.iter().max().map_or(0, |g| g + 1);
        let size = rows * column_group.len() / groups.max(1);
        let a = size as f64;
        let b = a / 1000.0;
        ArdState {
            alphas: vec![a / b; groups],
            a,
            b,
            column_group,
            rows,
        }
    }

    /// One group per column of the n×n state dynamics.
    pub fn for_slds(n: usize) -> Self {
        Self::with_groups(n, (0..n).collect())
    }

    /// One group per d×d lag block of the d×dr VAR(r) matrix.
    pub fn for_var(d: usize, r: usize) -> Self {
        Self::with_groups(d, (0..d * r).map(|c| c / d).collect())
    }

    pub fn num_groups(&self) -> usize {
        self.alphas.len()
    }

    pub fn group_size(&self, g: usize) -> usize {
        self.rows * self.column_group.iter().filter(|&&c| c == g).count()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::param("ARD Gamma hyperparameters must be positive"));
        }
        if self.alphas.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::param("ARD precisions must be positive"));
        }
        if self.column_group.iter().any(|&g| g >= self.alphas.len())
            || (0..self.alphas.len()).any(|g| self.group_size(g) == 0)
        {
            return Err(Error::param("ARD groups must partition the columns of A"));
        }
        Ok(())
    }

    /// Diagonal of Σ₀⁻¹ in column-stacked vec order.
    pub fn prior_precision_diag(&self) -> Vector {
        let mut d = Vector::zeros(self.rows * self.column_group.len());
        for (j, &g) in self.column_group.iter().enumerate() {
            d.rows_mut(j * self.rows, self.rows).fill(self.alphas[g]);
        }
        d
    }

    pub fn sample_prior_precisions<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        (0..self.num_groups())
            .map(|_| sample_gamma(self.a, self.b, rng))
            .collect()
    }
}

/// Gaussian conditional of vec(A) for mode `k` given Σ, μ and the ARD precisions.
pub fn ard_posterior(
    reg: &PseudoObsRegression,
    k: usize,
    sigma: &Mat,
    ard: &ArdState,
    mu: Option<&Vector>,
) -> Result<InformationGaussian> {
    let prec = Mat::from_diagonal(&ard.prior_precision_diag());
    let theta = Vector::zeros(prec.nrows());
    a_posterior_info(reg, &[(k, sigma, mu)], ard.rows, ard.column_group.len(), &prec, &theta)
}

pub fn sample_ard_dynamic_matrix<R: Rng + ?Sized>(
    reg: &PseudoObsRegression,
    k: usize,
    sigma: &Mat,
    ard: &ArdState,
    mu: Option<&Vector>,
    rng: &mut R,
) -> Result<Mat> {
    let post = ard_posterior(reg, k, sigma, ard, mu)?;
    let v = post.sample(rng).map_err(|e| e.within("ARD dynamic matrix"))?;
    Ok(unvec_cols(&v, ard.rows, ard.column_group.len()))
}

/// α_g ~ Gamma(a + |S_g|/2, b + ½ Σ_{(i,j)∈S_g} a_ij²).
pub fn sample_ard_precisions<R: Rng + ?Sized>(
    a_mat: &Mat,
    ard: &ArdState,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if a_mat.nrows() != ard.rows || a_mat.ncols() != ard.column_group.len() {
        return Err(Error::param("ARD precisions: A does not match the group map"));
    }
    let mut ss = vec![0.0; ard.num_groups()];
    for (j, &g) in ard.column_group.iter().enumerate() {
        ss[g] += a_mat.column(j).norm_squared();
    }
    (0..ard.num_groups())
        .map(|g| sample_gamma(ard.a + ard.group_size(g) as f64 / 2.0, ard.b + ss[g] / 2.0, rng))
        .collect()
}
