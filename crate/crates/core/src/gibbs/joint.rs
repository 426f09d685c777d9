use super::config::{ModelConfig, Observations, PriorFamily, Sharing};
use super::state::{pseudo_observations, ChainState, NoiseState};
use crate::distributions::{
    ln_beta_pdf, ln_dirichlet_pdf, ln_gamma_pdf, ln_inverse_wishart, ln_matrix_normal, ln_mvn, MatrixNormalParams,
};
use crate::dynamics::{MixtureNoise, NormalPrior};
use crate::error::{Error, Result};
use crate::hdp::{ConcentrationPrior, HdpPriors, HdpHyper, StickinessPrior};
use crate::linalg::{cholesky, ln_mvn_chol, spd_inverse, vec_cols, Mat, Vector};

fn ln_concentration(p: ConcentrationPrior, x: f64) -> f64 {
    match p {
        ConcentrationPrior::Gamma { shape, rate } => ln_gamma_pdf(x, shape, rate),
        ConcentrationPrior::Fixed(_) => 0.0,
    }
}

fn ln_hyper_prior(priors: &HdpPriors, h: &HdpHyper) -> f64 {
    let rho = match priors.rho {
        StickinessPrior::Beta { a, b } => ln_beta_pdf(h.rho(), a, b),
        StickinessPrior::Fixed(_) => 0.0,
    };
    ln_concentration(priors.alpha_plus_kappa, h.alpha_plus_kappa()) + ln_concentration(priors.gamma, h.gamma) + rho
}

fn ln_normal(x: &Vector, prior: &NormalPrior) -> Result<f64> {
    ln_mvn(x, &prior.mean, &prior.cov)
}

/// Truncated stick-breaking density of the weights plus the label and component terms.
fn ln_mixture(mix: &MixtureNoise) -> Result<f64> {
    let nc = mix.weights.len();
    let mut lp = 0.0;
    let mut rest = 1.0;
    for l in 0..nc.saturating_sub(1) {
        let v = (mix.weights[l] / rest).clamp(0.0, 1.0);
        lp += ln_beta_pdf(v, 1.0, mix.concentration) - rest.max(1e-300).ln();
        rest -= mix.weights[l];
    }
    for &l in &mix.labels {
        lp += mix.weights[l].max(1e-300).ln();
    }
    for c in &mix.components {
        lp += ln_inverse_wishart(c, &mix.prior)?;
    }
    Ok(lp)
}

/// log p(y, x, z, π, β, θ, hyperparameters), with every prior included.
pub fn log_joint(state: &ChainState, config: &ModelConfig, data: &Observations) -> Result<f64> {
    let l = state.trans.num_modes();
    let h = &config.hypers;
    let hyper = &state.hyper;
    let mut lp = ln_hyper_prior(&config.hdp, hyper);

    let beta: Vec<f64> = state.trans.beta.iter().copied().collect();
    lp += ln_dirichlet_pdf(&beta, &vec![hyper.gamma / l as f64; l]);
    for j in 0..l {
        let conc: Vec<f64> = (0..l)
            .map(|k| (hyper.alpha * beta[k] + if j == k { hyper.kappa } else { 0.0 }).max(f64::MIN_POSITIVE))
            .collect();
        let row: Vec<f64> = state.trans.pi.row(j).iter().copied().collect();
        lp += ln_dirichlet_pdf(&row, &conc);
    }
    lp += state.trans.beta[state.z[0]].max(1e-300).ln();
    for w in state.z.windows(2) {
        lp += state.trans.pi[(w[0], w[1])].max(1e-300).ln();
    }

    let iw = h.mniw.iw();
    let kinv = spd_inverse(&h.mniw.k, "MNIW K")?;
    for (k, dk) in state.dynamics.iter().enumerate() {
        lp += ln_inverse_wishart(&dk.sigma, &iw)?;
        match config.prior {
            PriorFamily::Mniw => {
                lp += ln_matrix_normal(
                    &dk.a,
                    &MatrixNormalParams {
                        m: h.mniw.m.clone(),
                        v: kinv.clone(),
                        sigma: dk.sigma.clone(),
                    },
                )?;
            }
            PriorFamily::Ard => {
                let ard = &state.ard[k];
                for &al in &ard.alphas {
                    lp += ln_gamma_pdf(al, ard.a, ard.b);
                }
                let prec = ard.prior_precision_diag();
                let v = vec_cols(&dk.a);
                lp += v
                    .iter()
                    .zip(prec.iter())
                    .map(|(x, p)| 0.5 * (p.ln() - (2.0 * std::f64::consts::PI).ln()) - 0.5 * p * x * x)
                    .sum::<f64>();
            }
            PriorFamily::Niwn => {
                if config.sharing == Sharing::PerMode {
                    lp += ln_normal(&vec_cols(&dk.a), &h.a_prior)?;
                }
            }
        }
        if let Some(mu) = &dk.mu {
            lp += ln_normal(mu, &h.process_mean)?;
        }
    }
    if config.sharing == Sharing::Shared {
        lp += ln_normal(&vec_cols(&state.dynamics[0].a), &h.a_prior)?;
    }

    let reg = pseudo_observations(config, data, state)?;
    let chols = state
        .dynamics
        .iter()
        .map(|d| cholesky(&d.sigma, "process noise covariance"))
        .collect::<Result<Vec<_>>>()?;
    for (t, &k) in state.z.iter().enumerate() {
        lp += ln_mvn_chol(&reg.psi[t], &state.dynamics[k].predict(&reg.psibar[t]), &chols[k]);
    }

    if let (Some(s), Some(noise)) = (&state.states, &state.noise) {
        let p0 = config.initial_state_cov();
        lp += ln_mvn(&s.x0, &Vector::zeros(p0.nrows()), &p0)?;
        let covs = noise.covariances();
        let rc = covs
            .iter()
            .map(|r| cholesky(r, "measurement noise covariance"))
            .collect::<Result<Vec<_>>>()?;
        for (t, y) in data.y.iter().enumerate() {
            let c = &rc[if rc.len() == 1 { 0 } else { t }];
            lp += ln_mvn_chol(y, &s.x[t].rows(0, y.len()).into_owned(), c);
        }
        lp += match noise {
            NoiseState::Gaussian(r) => {
                let prior = h
                    .measurement
                    .as_ref()
                    .ok_or_else(|| Error::param("SLDS needs a measurement-noise prior"))?;
                ln_inverse_wishart(r, prior)?
            }
            NoiseState::Mixture(mix) => ln_mixture(mix)?,
        };
    }
    if !lp.is_finite() {
        return Err(Error::numerical(
            format!("log joint density is not finite at iteration {}", state.iteration),
            None,
        ));
    }
    Ok(lp)
}

/// Summary of a single matrix as nested rows.
pub(crate) fn rows_of(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
