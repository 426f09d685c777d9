//! Mode-sequence samplers: blocked backward-message / forward-sampling for
//! both model classes, and the sequential sampler for the SLDS that
//! integrates the state sequence out with forward and backward information
//! filters.

use rand::Rng;

use crate::distributions::InformationGaussian;
use crate::dynamics::{ModeDynamics, PseudoObsRegression};
use crate::error::{Error, Result};
use crate::hdp::{sample_log_categorical, TransitionCounts, TransitionSet};
use crate::linalg::{cholesky, log_det, spd_inverse, symmetrize, Mat, Vector};
use crate::states::{backward_step, forward_filter_from_evidence, BackwardForm, ForwardForm};

/// Log backward messages; row t holds log m_{t+1,t}(·), normalized so its maximum is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeMessages {
    pub log_m: Mat,
}

/// T×L table of log N(ψ_t; A^(k)ψ̄_t + μ^(k), Σ^(k)).
pub fn mode_log_likelihoods(reg: &PseudoObsRegression, dynamics: &[ModeDynamics]) -> Result<Mat> {
    let t_len = reg.len();
    let l = dynamics.len();
    let mut out = Mat::zeros(t_len, l);
    for (k, dk) in dynamics.iter().enumerate() {
        let chol = cholesky(&dk.sigma, "mode noise covariance").map_err(|e| e.within(format!("mode {}", k + 1)))?;
        let dim = dk.sigma.nrows() as f64;
        let norm = -0.5 * (dim * (2.0 * std::f64::consts::PI).ln() + log_det(&chol));
        for t in 0..t_len {
            let r = &reg.psi[t] - dk.predict(&reg.psibar[t]);
            let q = r.dot(&chol.solve(&r));
            let v = norm - 0.5 * q;
            if !v.is_finite() {
                return Err(Error::numerical(
                    format!("non-finite likelihood at t={}, mode {}", t + 1, k + 1),
                    None,
                ));
            }
            out[(t, k)] = v;
        }
    }
    Ok(out)
}

/// Restrict labelled steps to their given mode.
pub fn apply_supervision(loglik: &mut Mat, labels: &[Option<usize>]) -> Result<()> {
    if labels.len() != loglik.nrows() {
        return Err(Error::param(format!(
            "supervision has {} labels for {} steps",
            labels.len(),
            loglik.nrows()
        )));
    }
    for (t, lab) in labels.iter().enumerate() {
        if let Some(k) = *lab {
            if k >= loglik.ncols() {
                return Err(Error::param(format!("supervised label {} exceeds truncation", k + 1)));
            }
            for j in 0..loglik.ncols() {
                if j != k {
                    loglik[(t, j)] = f64::NEG_INFINITY;
                }
            }
        }
    }
    Ok(())
}

pub fn hmm_backward_messages(loglik: &Mat, pi: &Mat) -> ModeMessages {
    let (t_len, l) = loglik.shape();
    let mut log_m = Mat::zeros(t_len, l);
    let mut w = Vector::zeros(l);
    for t in (0..t_len.saturating_sub(1)).rev() {
        let mx = (0..l)
            .map(|j| loglik[(t + 1, j)] + log_m[(t + 1, j)])
            .fold(f64::NEG_INFINITY, f64::max);
        for j in 0..l {
            w[j] = (loglik[(t + 1, j)] + log_m[(t + 1, j)] - mx).exp();
        }
        let m = pi * &w;
        let lm: Vec<f64> = m.iter().map(|v| v.ln()).collect();
        let top = lm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for k in 0..l {
            log_m[(t, k)] = lm[k] - top;
        }
    }
    ModeMessages { log_m }
}

/// Forward pass of the blocked sampler with a caller-supplied categorical
/// draw on unnormalized log weights.
pub fn forward_sample_modes_with(
    loglik: &Mat,
    messages: &ModeMessages,
    trans: &TransitionSet,
    mut choose: impl FnMut(&[f64]) -> Result<usize>,
) -> Result<Vec<usize>> {
    let (t_len, l) = loglik.shape();
    let mut z = Vec::with_capacity(t_len);
    let mut lw = vec![0.0; l];
    for t in 0..t_len {
        for k in 0..l {
            let prior = if t == 0 {
                trans.beta[k]
            } else {
                trans.pi[(z[t - 1], k)]
            };
            lw[k] = prior.ln() + loglik[(t, k)] + messages.log_m[(t, k)];
        }
        let k = choose(&lw).map_err(|e| e.within(format!("mode draw at t={}", t + 1)))?;
        z.push(k);
    }
    Ok(z)
}

/// Blocked draw of z_{1:T} from precomputed log-likelihoods; z_1 has initial distribution β.
pub fn block_sample_modes_from_table<R: Rng + ?Sized>(
    loglik: &Mat,
    trans: &TransitionSet,
    rng: &mut R,
) -> Result<(Vec<usize>, TransitionCounts)> {
    if loglik.ncols() != trans.num_modes() {
        return Err(Error::param("likelihood table and transitions disagree on L"));
    }
    let messages = hmm_backward_messages(loglik, &trans.pi);
    let z = forward_sample_modes_with(loglik, &messages, trans, |lw| sample_log_categorical(lw, rng))?;
    let counts = TransitionCounts::from_modes(&z, trans.num_modes())?;
    Ok((z, counts))
}

pub fn block_sample_modes<R: Rng + ?Sized>(
    reg: &PseudoObsRegression,
    trans: &TransitionSet,
    dynamics: &[ModeDynamics],
    supervision: Option<&[Option<usize>]>,
    rng: &mut R,
) -> Result<(Vec<usize>, TransitionCounts)> {
    if dynamics.len() != trans.num_modes() {
        return Err(Error::param(format!(
            "{} modes have dynamics, truncation is {}",
            dynamics.len(),
            trans.num_modes()
        )));
    }
    let mut loglik = mode_log_likelihoods(reg, dynamics)?;
    if let Some(labels) = supervision {
        apply_supervision(&mut loglik, labels)?;
    }
    block_sample_modes_from_table(&loglik, trans, rng)
}

/// Moment-form one-step predictions (m_k, P_k) of x_s under each candidate mode.
struct Predictor {
    mean: Vector,
    cov: Mat,
}

impl Predictor {
    fn from_filtered(f: &InformationGaussian) -> Result<Self> {
        let cov = spd_inverse(&f.lambda, "filtered precision")?;
        Ok(Predictor {
            mean: &cov * &f.theta,
            cov,
        })
    }

    fn initial(p0: &Mat) -> Self {
        Predictor {
            mean: Vector::zeros(p0.nrows()),
            cov: p0.clone(),
        }
    }

    /// log ∫ N(x; m_k, P_k) exp(−½xᵀΛᵇx + xᵀϑᵇ) dx up to a mode-independent constant.
    fn log_weight(&self, dk: &ModeDynamics, back: &InformationGaussian) -> Result<f64> {
        let p = symmetrize(&(&dk.sigma + &dk.a * &self.cov * dk.a.transpose()));
        let m = dk.predict(&self.mean);
        let pc = cholesky(&p, "candidate predictive covariance")?;
        let pinv_m = pc.solve(&m);
        let q = cholesky(&(pc.inverse() + &back.lambda), "candidate posterior precision")?;
        let h = &pinv_m + &back.theta;
        Ok(-0.5 * log_det(&pc) - 0.5 * log_det(&q) - 0.5 * m.dot(&pinv_m) + 0.5 * h.dot(&q.solve(&h)))
    }
}

fn check_sequential_inputs(local: &[InformationGaussian], z: &[usize], dynamics: &[ModeDynamics]) -> Result<()> {
    if local.is_empty() || z.len() != local.len() {
        return Err(Error::param("mode sequence and observations differ in length"));
    }
    if z.iter().any(|&k| k >= dynamics.len()) {
        return Err(Error::param("mode index exceeds number of instantiated dynamics"));
    }
    Ok(())
}

/// Candidate log-likelihood weights log f_k for z_t with every other mode
/// held at `z`; transition terms are not included.
pub fn sequential_log_weights(
    local: &[InformationGaussian],
    z: &[usize],
    t: usize,
    dynamics: &[ModeDynamics],
    p0: &Mat,
) -> Result<Vec<f64>> {
    check_sequential_inputs(local, z, dynamics)?;
    let t_len = local.len();
    if t >= t_len {
        return Err(Error::param("time index out of range"));
    }
    let n = p0.nrows();
    let pred = if t == 0 {
        Predictor::initial(p0)
    } else {
        let f = forward_filter_from_evidence(&local[..t], &z[..t], dynamics, p0, ForwardForm::Auto)?;
        Predictor::from_filtered(f.last().unwrap())?
    };
    let mut back = local[t_len - 1].clone();
    for s in (t + 1..t_len).rev() {
        let dk = &dynamics[z[s]];
        let sinv = spd_inverse(&dk.sigma, "process noise covariance")?;
        back = backward_step(&back, dk, &sinv, BackwardForm::Stable)?.combine(&local[s - 1]);
    }
    debug_assert_eq!(back.dim(), n);
    dynamics.iter().map(|dk| pred.log_weight(dk, &back)).collect()
}

/// One sweep of z_T, …, z_1, each drawn from p(z_t | z_{\t}, y_{1:T}) with x integrated out.
pub fn sequential_sample_modes_marginalized<R: Rng + ?Sized>(
    local: &[InformationGaussian],
    z: &[usize],
    trans: &TransitionSet,
    dynamics: &[ModeDynamics],
    p0: &Mat,
    supervision: Option<&[Option<usize>]>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_sequential_inputs(local, z, dynamics)?;
    let l = trans.num_modes();
    if dynamics.len() != l {
        return Err(Error::param("dynamics and transitions disagree on L"));
    }
    if let Some(lab) = supervision {
        if lab.len() != z.len() {
            return Err(Error::param("supervision length mismatch"));
        }
    }
    let t_len = local.len();
    // Forward filters use the old modes, which stay fixed for every earlier step.
    let filtered = forward_filter_from_evidence(local, z, dynamics, p0, ForwardForm::Auto)?;
    let sinv = dynamics
        .iter()
        .map(|d| spd_inverse(&d.sigma, "process noise covariance"))
        .collect::<Result<Vec<_>>>()?;

    let mut z_new = z.to_vec();
    let mut back = local[t_len - 1].clone();
    let mut lw = vec![0.0; l];
    for t in (0..t_len).rev() {
        if t + 1 < t_len {
            let k = z_new[t + 1];
            back = backward_step(&back, &dynamics[k], &sinv[k], BackwardForm::Stable)?.combine(&local[t]);
        }
        if let Some(k) = supervision.and_then(|lab| lab[t]) {
            z_new[t] = k;
            continue;
        }
        let pred = if t == 0 {
            Predictor::initial(p0)
        } else {
            Predictor::from_filtered(&filtered[t - 1])?
        };
        for (k, dk) in dynamics.iter().enumerate() {
            let prev = if t == 0 {
                trans.beta[k]
            } else {
                trans.pi[(z_new[t - 1], k)]
            };
            let next = if t + 1 < t_len {
                trans.pi[(k, z_new[t + 1])]
            } else {
                1.0
            };
            lw[k] = prev.ln()
                + next.ln()
                + pred
                    .log_weight(dk, &back)
                    .map_err(|e| e.within(format!("sequential mode step t={}, mode {}", t + 1, k + 1)))?;
        }
        z_new[t] = sample_log_categorical(&lw, rng).map_err(|e| e.within(format!("sequential mode step t={}", t + 1)))?;
    }
    Ok(z_new)
}
