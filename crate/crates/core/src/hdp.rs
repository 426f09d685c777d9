//! Sticky HDP-HMM transition machinery under the weak-limit (order-L
//! Dirichlet) truncation.
//!
//! The global weights β and the rows π_j are updated by the usual
//! auxiliary-variable augmentation: table counts m from a Chinese-restaurant
//! simulation, override counts w for tables created by the self-transition
//! bias, and the corrected counts m̄ that feed β's Dirichlet posterior.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::distributions::{sample_beta, sample_dirichlet, sample_gamma, sample_ln_beta};
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

pub type Counts = DMatrix<usize>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdpHyper {
    pub alpha: f64,
    pub gamma: f64,
    pub kappa: f64,
}

impl HdpHyper {
    pub fn new(alpha: f64, gamma: f64, kappa: f64) -> Result<Self> {
        let h = HdpHyper { alpha, gamma, kappa };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.gamma > 0.0 && self.kappa >= 0.0)
            || !(self.alpha + self.kappa).is_finite()
            || !self.gamma.is_finite()
        {
            return Err(Error::param(format!(
                "HDP hyperparameters need alpha > 0, gamma > 0, kappa >= 0 (got {self:?})"
            )));
        }
        Ok(())
    }

    pub fn rho(&self) -> f64 {
        self.kappa / (self.alpha + self.kappa)
    }

    pub fn alpha_plus_kappa(&self) -> f64 {
        self.alpha + self.kappa
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSet {
    pub beta: Vector,
    /// Row-stochastic; row j is π_j.
    pub pi: Mat,
}

impl TransitionSet {
    pub fn num_modes(&self) -> usize {
        self.beta.len()
    }

    pub fn check(&self) -> Result<()> {
        let l = self.beta.len();
        if self.pi.nrows() != l || self.pi.ncols() != l {
            return Err(Error::param("transition matrix must be L x L"));
        }
        let simplex = |v: &mut dyn Iterator<Item = f64>| {
            let mut s = 0.0;
            for x in v {
                if !(x >= 0.0) {
                    return false;
                }
                s += x;
            }
            (s - 1.0).abs() <= 1e-10
        };
        if !simplex(&mut self.beta.iter().cloned()) {
            return Err(Error::param("beta is not on the simplex"));
        }
        for j in 0..l {
            if !simplex(&mut self.pi.row(j).iter().cloned()) {
                return Err(Error::param(format!("transition row {j} is not on the simplex")));
            }
        }
        Ok(())
    }
}

/// Transition counts of a mode sequence plus its first label, which under the
/// initial distribution β contributes one extra draw from β.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionCounts {
    pub n: Counts,
    pub first: Option<usize>,
}

impl TransitionCounts {
    pub fn from_modes(z: &[usize], l: usize) -> Result<Self> {
        let mut n = Counts::zeros(l, l);
        if let Some(&bad) = z.iter().find(|&&k| k >= l) {
            return Err(Error::param(format!("mode label {bad} outside truncation {l}")));
        }
        for w in z.windows(2) {
            n[(w[0], w[1])] += 1;
        }
        Ok(TransitionCounts {
            n,
            first: z.first().copied(),
        })
    }

    pub fn empty(l: usize) -> Self {
        TransitionCounts {
            n: Counts::zeros(l, l),
            first: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxCounts {
    pub n: Counts,
    pub m: Counts,
    /// Override counts; only diagonal entries can be nonzero.
    pub w: Counts,
    pub mbar: Counts,
    pub first: Option<usize>,
}

impl AuxCounts {
    /// Column totals of m̄ plus the initial-state draw from β.
    pub fn beta_counts(&self) -> Vec<usize> {
        let l = self.mbar.ncols();
        (0..l)
            .map(|k| self.mbar.column(k).sum() + usize::from(self.first == Some(k)))
            .collect()
    }
}

/// GEM(γ) weights truncated at L; the last weight takes the remaining stick.
pub fn stick_breaking<R: Rng + ?Sized>(gamma: f64, l: usize, rng: &mut R) -> Result<Vector> {
    if l == 0 {
        return Err(Error::param("stick breaking needs L >= 1"));
    }
    if !(gamma > 0.0) {
        return Err(Error::param("stick-breaking concentration must be positive"));
    }
    let mut w = Vector::zeros(l);
    let mut rest = 1.0;
    for k in 0..l - 1 {
        let v = sample_beta(1.0, gamma, rng)?;
        w[k] = rest * v;
        rest -= w[k];
    }
    w[l - 1] = rest.max(0.0);
    let s = w.sum();
    Ok(w / s)
}

/// Draw π_j ~ Dir(αβ + κδ_j + n_j).
pub fn sample_transition_row<R: Rng + ?Sized>(
    beta: &Vector,
    hyper: &HdpHyper,
    counts_row: &[usize],
    j: usize,
    rng: &mut R,
) -> Result<Vector> {
    let l = beta.len();
    if counts_row.len() != l || j >= l {
        return Err(Error::param("transition row: dimension mismatch"));
    }
    let conc: Vec<f64> = (0..l)
        .map(|k| {
            let c = hyper.alpha * beta[k]
                + if k == j { hyper.kappa } else { 0.0 }
                + counts_row[k] as f64;
            // β entries may underflow to exactly zero in the weak limit.
            c.max(f64::MIN_POSITIVE)
        })
        .collect();
    sample_dirichlet(&conc, rng)
}

pub fn sample_transitions<R: Rng + ?Sized>(
    beta: &Vector,
    hyper: &HdpHyper,
    n: &Counts,
    rng: &mut R,
) -> Result<Mat> {
    let l = beta.len();
    let mut pi = Mat::zeros(l, l);
    for j in 0..l {
        let row: Vec<usize> = n.row(j).iter().copied().collect();
        let r = sample_transition_row(beta, hyper, &row, j, rng)?;
        pi.row_mut(j).copy_from(&r.transpose());
    }
    Ok(pi)
}

/// Number of occupied tables when `n` customers enter a restaurant with concentration `c`.
pub fn sample_table_count<R: Rng + ?Sized>(n: usize, c: f64, rng: &mut R) -> usize {
    if n == 0 {
        return 0;
    }
    let mut tables = 1;
    for i in 1..n {
        if rng.gen::<f64>() * (c + i as f64) < c {
            tables += 1;
        }
    }
    tables
}

pub fn sample_aux_counts<R: Rng + ?Sized>(
    counts: &TransitionCounts,
    beta: &Vector,
    hyper: &HdpHyper,
    rng: &mut R,
) -> Result<AuxCounts> {
    let l = beta.len();
    let n = &counts.n;
    if n.nrows() != l || n.ncols() != l {
        return Err(Error::param("auxiliary counts: dimension mismatch"));
    }
    let rho = hyper.rho();
    let mut m = Counts::zeros(l, l);
    let mut w = Counts::zeros(l, l);
    for j in 0..l {
        for k in 0..l {
            let c = hyper.alpha * beta[k] + if j == k { hyper.kappa } else { 0.0 };
            m[(j, k)] = sample_table_count(n[(j, k)], c, rng);
        }
        let mjj = m[(j, j)];
        if mjj > 0 && rho > 0.0 {
            let p = rho / (rho + beta[j] * (1.0 - rho));
            w[(j, j)] = Binomial::new(mjj as u64, p.clamp(0.0, 1.0))
                .map_err(|e| Error::param(format!("override binomial: {e}")))?
                .sample(rng) as usize;
        }
    }
    let mbar = &m - &w;
    Ok(AuxCounts {
        n: n.clone(),
        m,
        w,
        mbar,
        first: counts.first,
    })
}

/// β ~ Dir(γ/L + m̄_{·k} + [z_1 = k]).
pub fn update_beta<R: Rng + ?Sized>(aux: &AuxCounts, gamma: f64, rng: &mut R) -> Result<Vector> {
    let l = aux.mbar.ncols();
    let conc: Vec<f64> = aux
        .beta_counts()
        .iter()
        .map(|&c| gamma / l as f64 + c as f64)
        .collect();
    sample_dirichlet(&conc, rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConcentrationPrior {
    /// Shape and rate; the mean is shape / rate.
    Gamma { shape: f64, rate: f64 },
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StickinessPrior {
    Beta { a: f64, b: f64 },
    /// Fixed ρ = κ/(α+κ); `Fixed(0.0)` is the non-sticky HDP-HMM.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdpPriors {
    pub alpha_plus_kappa: ConcentrationPrior,
    pub gamma: ConcentrationPrior,
    pub rho: StickinessPrior,
}

impl Default for HdpPriors {
    fn default() -> Self {
        HdpPriors {
            alpha_plus_kappa: ConcentrationPrior::Gamma {
                shape: 1.0,
                rate: 0.01,
            },
            gamma: ConcentrationPrior::Gamma {
                shape: 1.0,
                rate: 0.01,
            },
            rho: StickinessPrior::Beta { a: 10.0, b: 1.0 },
        }
    }
}

impl HdpPriors {
    pub fn non_sticky(self) -> Self {
        HdpPriors {
            rho: StickinessPrior::Fixed(0.0),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in [self.alpha_plus_kappa, self.gamma] {
            match p {
                ConcentrationPrior::Gamma { shape, rate } if shape > 0.0 && rate > 0.0 => {}
                ConcentrationPrior::Fixed(v) if v > 0.0 && v.is_finite() => {}
                _ => return Err(Error::param(format!("invalid concentration prior {p:?}"))),
            }
        }
        match self.rho {
            StickinessPrior::Beta { a, b } if a > 0.0 && b > 0.0 => Ok(()),
            StickinessPrior::Fixed(r) if (0.0..1.0).contains(&r) => Ok(()),
            p => Err(Error::param(format!("invalid stickiness prior {p:?}"))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<HdpHyper> {
        let apk = match self.alpha_plus_kappa {
            ConcentrationPrior::Gamma { shape, rate } => sample_gamma(shape, rate, rng)?,
            ConcentrationPrior::Fixed(v) => v,
        };
        let gamma = match self.gamma {
            ConcentrationPrior::Gamma { shape, rate } => sample_gamma(shape, rate, rng)?,
            ConcentrationPrior::Fixed(v) => v,
        };
        let (ln_rho, ln_1m) = match self.rho {
            StickinessPrior::Beta { a, b } => sample_ln_beta(a, b, rng)?,
            StickinessPrior::Fixed(r) => (r.ln(), (1.0 - r).ln()),
        };
        split_concentration(apk, ln_rho, ln_1m, gamma)
    }
}

fn split_concentration(apk: f64, ln_rho: f64, ln_1m: f64, gamma: f64) -> Result<HdpHyper> {
    let alpha = (apk.ln() + ln_1m).exp().max(f64::MIN_POSITIVE);
    let kappa = (apk.ln() + ln_rho).exp();
    HdpHyper::new(alpha, gamma.max(f64::MIN_POSITIVE), kappa)
}

/// Resample α+κ, ρ and γ given the auxiliary counts.
///
/// α+κ uses one Beta auxiliary per visited row; γ is drawn with β
/// integrated out through per-column table counts at concentration γ/L and a
/// single Beta auxiliary, which is exact for the finite Dirichlet.
pub fn resample_hyperparameters<R: Rng + ?Sized>(
    aux: &AuxCounts,
    current: &HdpHyper,
    priors: &HdpPriors,
    rng: &mut R,
) -> Result<HdpHyper> {
    let l = aux.n.nrows();
    let m_total: usize = aux.m.iter().sum();
    let w_total: usize = aux.w.iter().sum();

    let apk = match priors.alpha_plus_kappa {
        ConcentrationPrior::Fixed(v) => v,
        ConcentrationPrior::Gamma { shape, rate } => {
            let c = current.alpha_plus_kappa();
            let mut sum_ln_r = 0.0;
            for j in 0..l {
                let nj: usize = aux.n.row(j).iter().sum();
                if nj > 0 {
                    sum_ln_r += sample_ln_beta(c, nj as f64, rng)?.0;
                }
            }
            sample_gamma(shape + m_total as f64, rate - sum_ln_r, rng)?
        }
    };

    let (ln_rho, ln_1m) = match priors.rho {
        StickinessPrior::Fixed(r) => (r.ln(), (1.0 - r).ln()),
        StickinessPrior::Beta { a, b } => {
            sample_ln_beta(a + w_total as f64, b + (m_total - w_total) as f64, rng)?
        }
    };

    let gamma = match priors.gamma {
        ConcentrationPrior::Fixed(v) => v,
        ConcentrationPrior::Gamma { shape, rate } => {
            let counts = aux.beta_counts();
            let total: usize = counts.iter().sum();
            if total == 0 {
                sample_gamma(shape, rate, rng)?
            } else {
                let g = current.gamma;
                let u: usize = counts
                    .iter()
                    .map(|&c| sample_table_count(c, g / l as f64, rng))
                    .sum();
                let ln_eta = sample_ln_beta(g, total as f64, rng)?.0;
                sample_gamma(shape + u as f64, rate - ln_eta, rng)?
            }
        }
    };

    split_concentration(apk, ln_rho, ln_1m, gamma)
}

/// One full update of (hyperparameters, β, π) given the mode sequence counts.
pub fn resample_transitions<R: Rng + ?Sized>(
    counts: &TransitionCounts,
    trans: &TransitionSet,
    hyper: &HdpHyper,
    priors: &HdpPriors,
    update_beta_step: bool,
    rng: &mut R,
) -> Result<(TransitionSet, HdpHyper)> {
    let aux = sample_aux_counts(counts, &trans.beta, hyper, rng)?;
    let hyper = resample_hyperparameters(&aux, hyper, priors, rng)?;
    let beta = if update_beta_step {
        update_beta(&aux, hyper.gamma, rng)?
    } else {
        trans.beta.clone()
    };
    let pi = sample_transitions(&beta, &hyper, &counts.n, rng)?;
    Ok((TransitionSet { beta, pi }, hyper))
}

/// Draw (β, π) from the weak-limit prior: β ~ Dir(γ/L), π_j ~ Dir(αβ + κδ_j).
pub fn sample_prior_transitions<R: Rng + ?Sized>(
    hyper: &HdpHyper,
    l: usize,
    rng: &mut R,
) -> Result<TransitionSet> {
    if l == 0 {
        return Err(Error::param("truncation level must be at least 1"));
    }
    let beta = sample_dirichlet(&vec![hyper.gamma / l as f64; l], rng)?;
    let pi = sample_transitions(&beta, hyper, &Counts::zeros(l, l), rng)?;
    Ok(TransitionSet { beta, pi })
}

/// Simulate z_{1:T} from the Markov chain with initial distribution β.
pub fn sample_mode_chain<R: Rng + ?Sized>(trans: &TransitionSet, t_len: usize, rng: &mut R) -> Vec<usize> {
    let mut z = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let p: Vec<f64> = if t == 0 {
            trans.beta.iter().copied().collect()
        } else {
            trans.pi.row(z[t - 1]).iter().copied().collect()
        };
        z.push(sample_categorical(&p, rng));
    }
    z
}

/// Draw an index with probability proportional to the nonnegative weights.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = k;
            if u < w {
                return k;
            }
            u -= w;
        }
    }
    last
}

/// Draw an index from unnormalized log weights.
pub fn sample_log_categorical<R: Rng + ?Sized>(log_w: &[f64], rng: &mut R) -> Result<usize> {
    let m = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::numerical("categorical draw: no finite log weight", None));
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - m).exp()).collect();
    Ok(sample_categorical(&w, rng))
}
