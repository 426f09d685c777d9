//! Blocked sampling of the SLDS state sequence: backward Kalman information
//! filter, forward conditional draws, the forward information filter used by
//! the marginalized mode sampler, and the moment-form Kalman likelihood.
//!
//! Time is 0-based here: `y[s]`, `z[s]`, `x[s]` are the quantities at step
//! s + 1 of the model, and the initial state x_0 ~ N(0, P0) is kept apart.
//! The observation matrix is C = [I_d 0].

use rand::Rng;

use crate::distributions::InformationGaussian;
use crate::dynamics::ModeDynamics;
use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, condition_estimate, ln_mvn_chol, sample_info, spd_inverse, symmetrize, Mat, Vector,
};

/// Information-form likelihood term of y_s on x_s: (CᵀR⁻¹y_s, CᵀR⁻¹C).
///
/// `r` holds either one shared covariance or one per time step.
pub fn local_evidence(y: &[Vector], n: usize, r: &[Mat]) -> Result<Vec<InformationGaussian>> {
    if r.len() != 1 && r.len() != y.len() {
        return Err(Error::param(format!(
            "measurement covariance list has length {}, expected 1 or {}",
            r.len(),
            y.len()
        )));
    }
    let inv = r
        .iter()
        .map(|m| spd_inverse(m, "measurement noise covariance"))
        .collect::<Result<Vec<_>>>()?;
    y.iter()
        .enumerate()
        .map(|(s, ys)| {
            let d = ys.len();
            if d > n {
                return Err(Error::param("observation dimension exceeds state dimension"));
            }
            let ri = &inv[if inv.len() == 1 { 0 } else { s }];
            let mut lambda = Mat::zeros(n, n);
            lambda.view_mut((0, 0), (d, d)).copy_from(ri);
            let mut theta = Vector::zeros(n);
            theta.rows_mut(0, d).copy_from(&(ri * ys));
            Ok(InformationGaussian { theta, lambda })
        })
        .collect()
}

fn check_modes(z: &[usize], dynamics: &[ModeDynamics], t_len: usize) -> Result<()> {
    if z.len() != t_len {
        return Err(Error::param(format!(
            "mode sequence has length {}, observations {}",
            z.len(),
            t_len
        )));
    }
    if let Some(&k) = z.iter().find(|&&k| k >= dynamics.len()) {
        return Err(Error::param(format!("mode {k} has no dynamics")));
    }
    Ok(())
}

/// Σ⁻¹ for every mode that appears in `z`.
fn inverse_covariances(z: &[usize], dynamics: &[ModeDynamics]) -> Result<Vec<Option<Mat>>> {
    let mut out = vec![None; dynamics.len()];
    for &k in z {
        if out[k].is_none() {
            out[k] = Some(spd_inverse(&dynamics[k].sigma, "process noise covariance")?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackwardForm {
    /// Joseph-style update that needs no inverse of A.
    Stable,
    Direct,
}

/// Propagate the updated backward information at step s through the
/// dynamics of mode z_s, giving the message to x_{s−1}.
pub fn backward_step(
    next: &InformationGaussian,
    dynamics: &ModeDynamics,
    sigma_inv: &Mat,
    form: BackwardForm,
) -> Result<InformationGaussian> {
    let n = next.dim();
    let a = &dynamics.a;
    let mu = dynamics.mu_or_zero();
    let inner = cholesky(&(&next.lambda + sigma_inv), "backward filter inner matrix")?;
    let (theta, lambda) = match form {
        BackwardForm::Stable => {
            // J = Λᵇ(Λᵇ + Σ⁻)⁻¹, L = I − J.
            let j = inner.solve(&next.lambda).transpose();
            let l = Mat::identity(n, n) - &j;
            let lambda = a.transpose()
                * (&l * &next.lambda * l.transpose() + &j * sigma_inv * j.transpose())
                * a;
            let theta = a.transpose() * (&l * (&next.theta - &next.lambda * &mu));
            (theta, lambda)
        }
        BackwardForm::Direct => {
            let sa = sigma_inv * a;
            let lambda = a.transpose() * &sa - sa.transpose() * inner.solve(&sa);
            let smu = sigma_inv * &mu;
            let theta = -(a.transpose() * &smu) + sa.transpose() * inner.solve(&(&next.theta + &smu));
            (theta, lambda)
        }
    };
    Ok(InformationGaussian {
        theta,
        lambda: symmetrize(&lambda),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardFilterBank {
    /// Λᵇ_{s|s}, ϑᵇ_{s|s}: information about x_s from y_{s..T}.
    pub updated: Vec<InformationGaussian>,
    /// Λ_{s+1,s}, ϑ_{s+1,s}: information about x_s from y_{s+1..T}; flat at the last step.
    pub predicted: Vec<InformationGaussian>,
    /// Message from all observations to the initial state x_0.
    pub initial: InformationGaussian,
}

pub fn backward_filter_from_evidence(
    local: &[InformationGaussian],
    z: &[usize],
    dynamics: &[ModeDynamics],
    form: BackwardForm,
) -> Result<BackwardFilterBank> {
    let t_len = local.len();
    if t_len == 0 {
        return Err(Error::param("backward filter needs at least one observation"));
    }
    check_modes(z, dynamics, t_len)?;
    let sinv = inverse_covariances(z, dynamics)?;
    let n = local[0].dim();
    let mut updated = vec![InformationGaussian::flat(n); t_len];
    let mut predicted = vec![InformationGaussian::flat(n); t_len];
    updated[t_len - 1] = local[t_len - 1].clone();
    let mut initial = InformationGaussian::flat(n);
    for s in (0..t_len).rev() {
        let k = z[s];
        let msg = backward_step(&updated[s], &dynamics[k], sinv[k].as_ref().unwrap(), form)
            .map_err(|e| e.within(format!("backward filter at t={}", s + 1)))?;
        if s == 0 {
            initial = msg;
        } else {
            predicted[s - 1] = msg;
            updated[s - 1] = predicted[s - 1].combine(&local[s - 1]);
        }
    }
    Ok(BackwardFilterBank {
        updated,
        predicted,
        initial,
    })
}

/// Backward information filter for observations `y` with measurement covariance(s) `r`.
pub fn backward_info_filter(
    y: &[Vector],
    z: &[usize],
    dynamics: &[ModeDynamics],
    r: &[Mat],
) -> Result<BackwardFilterBank> {
    let n = dynamics
        .first()
        .ok_or_else(|| Error::param("no dynamics"))?
        .a
        .nrows();
    let local = local_evidence(y, n, r)?;
    backward_filter_from_evidence(&local, z, dynamics, BackwardForm::Stable)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSample {
    pub x0: Vector,
    pub x: Vec<Vector>,
}

/// Exact joint draw of x_{1:T} given (y, z, θ); x_1 uses the prior predictive
/// N(μ, Σ + A P0 Aᵀ) with x_0 integrated out, and x_0 is then drawn given x_1
/// so the regression for the first transition has a lagged state.
pub fn forward_sample_states<R: Rng + ?Sized>(
    bank: &BackwardFilterBank,
    z: &[usize],
    dynamics: &[ModeDynamics],
    p0: &Mat,
    rng: &mut R,
) -> Result<StateSample> {
    let t_len = bank.updated.len();
    check_modes(z, dynamics, t_len)?;
    let sinv = inverse_covariances(z, dynamics)?;
    let mut x = Vec::with_capacity(t_len);

    let d0 = &dynamics[z[0]];
    let prior_cov = &d0.sigma + &d0.a * p0 * d0.a.transpose();
    let prior_prec = spd_inverse(&prior_cov, "initial state predictive covariance")?;
    let theta = &prior_prec * d0.mu_or_zero() + &bank.updated[0].theta;
    let lambda = prior_prec + &bank.updated[0].lambda;
    x.push(sample_info(&theta, &lambda, rng).map_err(|e| e.within("state draw at t=1"))?);

    for s in 1..t_len {
        let dk = &dynamics[z[s]];
        let si = sinv[z[s]].as_ref().unwrap();
        let theta = si * dk.predict(&x[s - 1]) + &bank.updated[s].theta;
        let lambda = si + &bank.updated[s].lambda;
        x.push(sample_info(&theta, &lambda, rng).map_err(|e| e.within(format!("state draw at t={}", s + 1)))?);
    }

    let si = sinv[z[0]].as_ref().unwrap();
    let p0_inv = spd_inverse(p0, "initial state covariance")?;
    let lambda = p0_inv + d0.a.transpose() * si * &d0.a;
    let theta = d0.a.transpose() * si * (&x[0] - d0.mu_or_zero());
    let x0 = sample_info(&theta, &lambda, rng).map_err(|e| e.within("initial state draw"))?;
    Ok(StateSample { x0, x })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardForm {
    /// Information-form update through A⁻¹; only used when A is well conditioned.
    Stable,
    Direct,
    /// Stable where A is invertible with condition number below 1e8, direct otherwise.
    Auto,
}

/// Prediction of x_s given the filtered information about x_{s−1}.
pub fn forward_predict(
    filtered: &InformationGaussian,
    dynamics: &ModeDynamics,
    sigma_inv: &Mat,
    form: ForwardForm,
) -> Result<InformationGaussian> {
    let a = &dynamics.a;
    let n = a.nrows();
    let mu = dynamics.mu_or_zero();
    let use_stable = match form {
        ForwardForm::Direct => false,
        ForwardForm::Stable | ForwardForm::Auto => {
            let ok = a.clone().lu().is_invertible() && general_condition(a) < 1e8;
            if !ok && form == ForwardForm::Stable {
                log::debug!("forward filter: dynamic matrix is not safely invertible, using direct form");
            }
            ok
        }
    };
    if use_stable {
        let a_inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::numerical("forward filter: inverting A", Some(general_condition(a))))?;
        // Information of A x_{s−1} + μ, then the Joseph-style noise update.
        let m = symmetrize(&(a_inv.transpose() * &filtered.lambda * &a_inv));
        let inner = cholesky(&(&m + sigma_inv), "forward filter inner matrix")?;
        let j = inner.solve(&m).transpose();
        let l = Mat::identity(n, n) - &j;
        let lambda = &l * &m * l.transpose() + &j * sigma_inv * j.transpose();
        let theta = &l * (a_inv.transpose() * (&filtered.theta + &filtered.lambda * (&a_inv * &mu)));
        Ok(InformationGaussian {
            theta,
            lambda: symmetrize(&lambda),
        })
    } else {
        let fc = cholesky(&filtered.lambda, "forward filter precision")?;
        let p = symmetrize(&(&dynamics.sigma + a * fc.solve(&a.transpose())));
        let pc = cholesky(&p, "forward filter predictive covariance")?;
        let mean = &mu + a * fc.solve(&filtered.theta);
        Ok(InformationGaussian {
            theta: pc.solve(&mean),
            lambda: symmetrize(&pc.inverse()),
        })
    }
}

fn general_condition(a: &Mat) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Filtered information {ϑᶠ_{s|s}, Λᶠ_{s|s}} for every step; x_0 ~ N(0, P0).
pub fn forward_filter_from_evidence(
    local: &[InformationGaussian],
    z: &[usize],
    dynamics: &[ModeDynamics],
    p0: &Mat,
    form: ForwardForm,
) -> Result<Vec<InformationGaussian>> {
    check_modes(z, dynamics, local.len())?;
    let sinv = inverse_covariances(z, dynamics)?;
    let n = p0.nrows();
    let mut cur = InformationGaussian {
        theta: Vector::zeros(n),
        lambda: spd_inverse(p0, "initial state covariance")?,
    };
    let mut out = Vec::with_capacity(local.len());
    for (s, ev) in local.iter().enumerate() {
        let k = z[s];
        let pred = forward_predict(&cur, &dynamics[k], sinv[k].as_ref().unwrap(), form)
            .map_err(|e| e.within(format!("forward filter at t={}", s + 1)))?;
        cur = pred.combine(ev);
        out.push(cur.clone());
    }
    Ok(out)
}

pub fn forward_info_filter(
    y: &[Vector],
    z: &[usize],
    dynamics: &[ModeDynamics],
    r: &[Mat],
    p0: &Mat,
) -> Result<Vec<InformationGaussian>> {
    let local = local_evidence(y, p0.nrows(), r)?;
    forward_filter_from_evidence(&local, z, dynamics, p0, ForwardForm::Auto)
}

/// log p(y_{1:T} | z, θ) by the moment-form Kalman filter.
pub fn kalman_log_likelihood(
    y: &[Vector],
    z: &[usize],
    dynamics: &[ModeDynamics],
    r: &[Mat],
    p0: &Mat,
) -> Result<f64> {
    check_modes(z, dynamics, y.len())?;
    if r.len() != 1 && r.len() != y.len() {
        return Err(Error::param("measurement covariance list has the wrong length"));
    }
    let n = p0.nrows();
    let mut m = Vector::zeros(n);
    let mut p = p0.clone();
    let mut ll = 0.0;
    for (s, ys) in y.iter().enumerate() {
        let dk = &dynamics[z[s]];
        m = dk.predict(&m);
        p = symmetrize(&(&dk.a * &p * dk.a.transpose() + &dk.sigma));
        let d = ys.len();
        let rs = &r[if r.len() == 1 { 0 } else { s }];
        let s_cov = p.view((0, 0), (d, d)).into_owned() + rs;
        let sc = cholesky(&s_cov, "innovation covariance")
            .map_err(|e| e.within(format!("Kalman likelihood at t={}", s + 1)))?;
        let pred_y = m.rows(0, d).into_owned();
        ll += ln_mvn_chol(ys, &pred_y, &sc);
        // Gain K = P Cᵀ S⁻¹ with C = [I 0].
        let pct = p.columns(0, d).into_owned();
        let gain = sc.solve(&pct.transpose()).transpose();
        m += &gain * (ys - pred_y);
        p = symmetrize(&(&p - &gain * pct.transpose()));
    }
    Ok(ll)
}

/// Reject filter banks whose precisions are not PSD after symmetrization.
pub fn check_bank_psd(bank: &BackwardFilterBank) -> Result<()> {
    for (s, g) in bank.updated.iter().chain(&bank.predicted).enumerate() {
        let ev = g.lambda.clone().symmetric_eigenvalues();
        let scale = ev.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if ev.iter().any(|&v| v < -1e-9 * scale) {
            return Err(Error::numerical(
                format!("filter precision {s} is indefinite"),
                Some(condition_estimate(&g.lambda)),
            ));
        }
    }
    Ok(())
}
