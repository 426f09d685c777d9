//! Data-driven hyperparameter recipes.

use std::f64::consts::PI;

use super::{ArdState, MniwHyper, NormalPrior};
use crate::distributions::InverseWishartParams;
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelShape {
    Ar { d: usize, order: usize },
    /// State dimension `n` ≥ observation dimension `d`.
    Slds { d: usize, n: usize },
}

impl ModelShape {
    /// Dimension ℓ of the pseudo-observations.
    pub fn psi_dim(&self) -> usize {
        match *self {
            ModelShape::Ar { d, .. } => d,
            ModelShape::Slds { n, .. } => n,
        }
    }

    /// Number of columns m of A.
    pub fn regressor_dim(&self) -> usize {
        match *self {
            ModelShape::Ar { d, order } => d * order,
            ModelShape::Slds { n, .. } => n,
        }
    }

    pub fn obs_dim(&self) -> usize {
        match *self {
            ModelShape::Ar { d, .. } | ModelShape::Slds { d, .. } => d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HyperPreset {
    /// Unsupervised fits: M = 0, K = I, n0 = m + 2, S0 from the data covariance.
    Standard {
        /// Fraction of Σ̄ given to the process noise of an SLDS (0.675 for n = d).
        process_fraction: f64,
        /// Fraction of Σ̄ given to the measurement noise of an SLDS (0.075 for n = d).
        measurement_fraction: f64,
    },
    /// Partially supervised fits on random-walk-like data: Σ̄ from first
    /// differences, n0 = 10, process-mean prior N(0, 0.75·S0).
    PartiallySupervised,
    /// Switching-mean stochastic-volatility fits with the N-IW-N prior.
    StochasticVolatility,
}

impl Default for HyperPreset {
    fn default() -> Self {
        HyperPreset::Standard {
            process_fraction: 0.675,
            measurement_fraction: 0.075,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataHypers {
    /// Empirical covariance Σ̄ of the (centered) observations, d×d.
    pub sigma_bar: Mat,
    pub mniw: MniwHyper,
    pub ard: ArdState,
    /// Prior on vec(A) for the N-IW-N family.
    pub a_prior: NormalPrior,
    pub process_mean: NormalPrior,
    /// SLDS measurement-noise prior.
    pub measurement: Option<InverseWishartParams>,
    /// Component prior for mixture measurement noise.
    pub mixture_component: InverseWishartParams,
}

/// 1/T empirical covariance of the centered rows.
pub fn empirical_covariance(y: &[Vector]) -> Result<Mat> {
    if y.len() < 2 {
        return Err(Error::param("need at least two observations to set hyperparameters"));
    }
    let d = y[0].len();
    let t = y.len() as f64;
    let mean = y.iter().fold(Vector::zeros(d), |a, v| a + v) / t;
    let mut s = Mat::zeros(d, d);
    for v in y {
        let c = v - &mean;
        s += &c * c.transpose();
    }
    Ok(s / t)
}

/// Embed a d×d block into an ℓ×ℓ matrix, padding the extra diagonal with the mean of diag(block).
fn embed(block: &Mat, l: usize) -> Mat {
    let d = block.nrows();
    let mut m = Mat::zeros(l, l);
    m.view_mut((0, 0), (d, d)).copy_from(block);
    let fill = block.trace() / d as f64;
    for i in d..l {
        m[(i, i)] = fill;
    }
    m
}

fn regularize(m: Mat) -> Mat {
    // Degenerate data (a constant component) would otherwise give a singular scale.
    let floor = 1e-8 * (m.trace().abs() / m.nrows() as f64).max(1e-300);
    let mut m = crate::linalg::symmetrize(&m);
    if !crate::linalg::is_spd(&m) {
        for i in 0..m.nrows() {
            m[(i, i)] += floor.max(1e-12);
        }
    }
    m
}

pub fn set_hyperparameters_from_data(
    y: &[Vector],
    shape: ModelShape,
    preset: HyperPreset,
) -> Result<DataHypers> {
    let d = shape.obs_dim();
    if y.first().map(|v| v.len()) != Some(d) {
        return Err(Error::param(format!("observations must have dimension {d}")));
    }
    if let ModelShape::Slds { n, d } = shape {
        if n < d {
            return Err(Error::param("SLDS state dimension must be at least the observation dimension"));
        }
    }
    let (l, m) = (shape.psi_dim(), shape.regressor_dim());
    let raw = empirical_covariance(y)?;

    let (sigma_bar, s0, n0, mean_cov) = match preset {
        HyperPreset::Standard {
            process_fraction,
            measurement_fraction: _,
        } => {
            let frac = match shape {
                ModelShape::Ar { .. } => 0.75,
                ModelShape::Slds { .. } => process_fraction,
            };
            let sb = regularize(raw.clone());
            let s0 = embed(&(&sb * frac), l);
            (sb, s0.clone(), (m + 2) as f64, embed(&(&raw * 0.75), l))
        }
        HyperPreset::PartiallySupervised => {
            let diffs: Vec<Vector> = y.windows(2).map(|w| &w[1] - &w[0]).collect();
            let sb = regularize(empirical_covariance(&diffs)?);
            let s0 = embed(&(&sb * 0.75), l);
            let n0 = 10f64.max(l as f64 + 2.0);
            (sb, s0.clone(), n0, &s0 * 0.75)
        }
        HyperPreset::StochasticVolatility => {
            let sb = regularize(raw.clone());
            // dof ℓ + 2 (3 for scalar state) with E[Σ] = 0.75Σ̄, so S0 = 0.75Σ̄·(ν − ℓ − 1).
            let nu = l as f64 + 2.0;
            let s0 = embed(&(&sb * 0.75), l) * (nu - l as f64 - 1.0);
            (sb, s0, nu, embed(&(&raw * 0.75), l))
        }
    };
    let mean_cov = regularize(mean_cov);

    let mniw = MniwHyper {
        m: Mat::zeros(l, m),
        k: Mat::identity(m, m),
        n0,
        s0: s0.clone(),
    };
    let ard = match shape {
        ModelShape::Ar { d, order } => ArdState::for_var(d, order),
        ModelShape::Slds { n, .. } => ArdState::for_slds(n),
    };
    let a_cov = match preset {
        HyperPreset::StochasticVolatility => embed(&(&sigma_bar * 0.75), l),
        _ => mean_cov.clone(),
    };
    let a_prior = NormalPrior {
        mean: Vector::zeros(l * m),
        cov: Mat::identity(m, m).kronecker(&a_cov),
    };
    let process_mean = NormalPrior {
        mean: Vector::zeros(l),
        cov: mean_cov,
    };
    let measurement = match shape {
        ModelShape::Slds { d, .. } => {
            let frac = match preset {
                HyperPreset::Standard {
                    measurement_fraction,
                    ..
                } => measurement_fraction,
                _ => 0.075,
            };
            Some(InverseWishartParams::new(
                d as f64 + 2.0,
                &sigma_bar * frac,
            )?)
        }
        ModelShape::Ar { .. } => None,
    };
    // dof d + 2 with expected value 5π² per coordinate.
    let mixture_component = InverseWishartParams::new(
        d as f64 + 2.0,
        Mat::identity(d, d) * (5.0 * PI * PI),
    )?;

    Ok(DataHypers {
        sigma_bar,
        mniw,
        ard,
        a_prior,
        process_mean,
        measurement,
        mixture_component,
    })
}
