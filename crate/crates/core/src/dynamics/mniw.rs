//! Matrix-normal inverse-Wishart prior on (A, Σ): Σ ~ IW(n0, S0),
//! A | Σ ~ MN(M, Σ, K⁻¹) with K the column precision.

use rand::Rng;

use super::{outer_sum, ModeDynamics, PseudoObsRegression};
use crate::distributions::{
    sample_inverse_wishart, sample_matrix_normal, InverseWishartParams, MatrixNormalParams,
};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, is_spd, symmetrize, Mat, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct MniwHyper {
    pub m: Mat,
    pub k: Mat,
    pub n0: f64,
    pub s0: Mat,
}

impl MniwHyper {
    pub fn validate(&self) -> Result<()> {
        let (l, m) = (self.m.nrows(), self.m.ncols());
        if self.k.nrows() != m || self.k.ncols() != m {
            return Err(Error::param(format!("MNIW: K must be {m}x{m}")));
        }
        if self.s0.nrows() != l || self.s0.ncols() != l {
            return Err(Error::param(format!("MNIW: S0 must be {l}x{l}")));
        }
        if !is_spd(&self.k) || !is_spd(&self.s0) {
            return Err(Error::param("MNIW: K and S0 must be positive definite"));
        }
        if !(self.n0 > l as f64 - 1.0) {
            return Err(Error::param("MNIW: n0 must exceed dim - 1"));
        }
        Ok(())
    }

    pub fn iw(&self) -> InverseWishartParams {
        InverseWishartParams {
            dof: self.n0,
            scale: self.s0.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MniwStats {
    /// Ψ̄Ψ̄ᵀ + K
    pub s_bb: Mat,
    /// ΨΨ̄ᵀ + MK
    pub s_pb: Mat,
    /// ΨΨᵀ + MKMᵀ
    pub s_pp: Mat,
    pub n: usize,
}

/// Sufficient statistics for mode `k`; when `mu` is given the regression uses ψ_t − μ.
pub fn mniw_sufficient_stats(
    reg: &PseudoObsRegression,
    k: usize,
    hyper: &MniwHyper,
    mu: Option<&Vector>,
) -> Result<MniwStats> {
    let (l, m) = (hyper.m.nrows(), hyper.m.ncols());
    if let (Some(p), Some(pb)) = (reg.psi.first(), reg.psibar.first()) {
        if p.len() != l || pb.len() != m {
            return Err(Error::param(format!(
                "MNIW statistics: regression is {}x{}, prior mean is {l}x{m}",
                p.len(),
                pb.len()
            )));
        }
    }
    let idx: Vec<usize> = reg.indices_of(k).collect();
    let centered: Vec<Vector>;
    let psi: &[Vector] = match mu {
        Some(mu) => {
            centered = reg.psi.iter().map(|p| p - mu).collect();
            &centered
        }
        None => &reg.psi,
    };
    let mk = &hyper.m * &hyper.k;
    let s_bb = outer_sum(&idx, |t| &reg.psibar[t], |t| &reg.psibar[t], m, m) + &hyper.k;
    let s_pb = outer_sum(&idx, |t| &psi[t], |t| &reg.psibar[t], l, m) + &mk;
    let s_pp = outer_sum(&idx, |t| &psi[t], |t| &psi[t], l, l) + &mk * hyper.m.transpose();
    Ok(MniwStats {
        s_bb: symmetrize(&s_bb),
        s_pb,
        s_pp: symmetrize(&s_pp),
        n: idx.len(),
    })
}

/// Posterior (E[A | Σ, data], column precision S_ψ̄ψ̄, IW law of Σ).
pub fn mniw_posterior(stats: &MniwStats, hyper: &MniwHyper) -> Result<(Mat, Mat, InverseWishartParams)> {
    let c = cholesky(&stats.s_bb, "MNIW posterior S_psibar_psibar")?;
    // S_ψψ̄ S_ψ̄ψ̄⁻¹ = (S_ψ̄ψ̄⁻¹ S_ψψ̄ᵀ)ᵀ
    let mean = c.solve(&stats.s_pb.transpose()).transpose();
    let cond = &stats.s_pp - &mean * stats.s_pb.transpose();
    let scale = symmetrize(&(cond + &hyper.s0));
    Ok((
        mean,
        stats.s_bb.clone(),
        InverseWishartParams {
            dof: stats.n as f64 + hyper.n0,
            scale,
        },
    ))
}

pub fn sample_mniw_posterior<R: Rng + ?Sized>(
    stats: &MniwStats,
    hyper: &MniwHyper,
    rng: &mut R,
) -> Result<ModeDynamics> {
    let (mean, s_bb, iw) = mniw_posterior(stats, hyper)?;
    let sigma = sample_inverse_wishart(&iw, rng)?;
    let v = crate::linalg::spd_inverse(&s_bb, "MNIW posterior column covariance")?;
    let a = sample_matrix_normal(&MatrixNormalParams { m: mean, v, sigma: sigma.clone() }, rng)?;
    Ok(ModeDynamics { a, sigma, mu: None })
}

pub fn sample_mniw_prior<R: Rng + ?Sized>(hyper: &MniwHyper, rng: &mut R) -> Result<ModeDynamics> {
    let sigma = sample_inverse_wishart(&hyper.iw(), rng)?;
    let v = crate::linalg::spd_inverse(&hyper.k, "MNIW prior column covariance")?;
    let a = sample_matrix_normal(
        &MatrixNormalParams {
            m: hyper.m.clone(),
            v,
            sigma: sigma.clone(),
        },
        rng,
    )?;
    Ok(ModeDynamics { a, sigma, mu: None })
}
