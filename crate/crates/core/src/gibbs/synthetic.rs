use rand::Rng;

use super::config::Observations;
use crate::dynamics::{ModeDynamics, ModelShape};
use crate::error::{Error, Result};
use crate::hdp::{sample_mode_chain, TransitionSet};
use crate::linalg::{cholesky, std_normal_vector, Mat, Vector};

/// How observations are produced from the state of an SLDS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Emission {
    /// y_t = C x_t + w_t, C = [I_d 0], w_t ~ N(0, R).
    Linear,
    /// Returns y_t = exp(x_t / 2)·ε_t with ε_t ~ N(0, 1): the state is a log-volatility.
    Volatility,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomScenario {
    pub shape: ModelShape,
    pub dynamics: Vec<ModeDynamics>,
    pub trans: TransitionSet,
    pub emission: Emission,
    pub measurement: Option<Mat>,
    /// Fixed mode sequence instead of a Markov draw; its length sets T.
    pub modes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Five-mode switching VAR(1) in three dimensions.
    Var1FiveMode,
    /// Three-mode scalar switching AR(2).
    Ar2ThreeMode,
    /// Three-mode SLDS with C = I_3.
    SldsThreeMode,
    /// Two-mode SLDS whose modes use different subsets of the state.
    SparseSlds,
    /// Shared-A log-volatility with a switching mean, observed through returns.
    Mssv,
    Custom(CustomScenario),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Var1FiveMode => "var1-5mode",
            Scenario::Ar2ThreeMode => "ar2-3mode",
            Scenario::SldsThreeMode => "slds-3mode",
            Scenario::SparseSlds => "sparse-slds",
            Scenario::Mssv => "mssv",
            Scenario::Custom(_) => "custom",
        }
    }

    pub fn from_name(name: &str) -> Option<Scenario> {
        Some(match name {
            "var1-5mode" => Scenario::Var1FiveMode,
            "ar2-3mode" => Scenario::Ar2ThreeMode,
            "slds-3mode" => Scenario::SldsThreeMode,
            "sparse-slds" => Scenario::SparseSlds,
            "mssv" => Scenario::Mssv,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub shape: ModelShape,
    pub observations: Observations,
    pub z: Vec<usize>,
    pub x: Option<Vec<Vector>>,
    pub dynamics: Vec<ModeDynamics>,
    pub trans: TransitionSet,
    pub measurement: Option<Mat>,
}

/// Self-transition `p_self`, remaining mass split evenly, uniform initial distribution.
pub fn sticky_uniform_transitions(l: usize, p_self: f64) -> TransitionSet {
    let off = if l > 1 { (1.0 - p_self) / (l - 1) as f64 } else { 0.0 };
    let pi = Mat::from_fn(l, l, |i, j| if i == j { if l > 1 { p_self } else { 1.0 } } else { off });
    TransitionSet {
        beta: Vector::from_element(l, 1.0 / l as f64),
        pi,
    }
}

fn mat3(v: [f64; 9]) -> Mat {
    Mat::from_row_slice(3, 3, &v)
}

fn modes_with_identity_noise(mats: Vec<Mat>) -> Vec<ModeDynamics> {
    mats.into_iter()
        .map(|a| {
            let n = a.nrows();
            ModeDynamics {
                a,
                sigma: Mat::identity(n, n),
                mu: None,
            }
        })
        .collect()
}

fn var1_five_mode() -> Vec<ModeDynamics> {
    modes_with_identity_noise(vec![
        mat3([0.9, 0.0, 0.0, 0.0, 0.9, 0.0, 0.0, 0.0, 0.9]),
        mat3([-0.8, 0.0, 0.0, 0.0, -0.8, 0.0, 0.0, 0.0, -0.8]),
        mat3([0.45, -0.78, 0.0, 0.78, 0.45, 0.0, 0.0, 0.0, 0.9]),
        mat3([0.2, 0.0, 0.7, 0.0, -0.6, 0.0, -0.7, 0.0, 0.2]),
        mat3([0.5, 0.5, 0.0, -0.5, 0.5, 0.0, 0.0, 0.0, -0.9]),
    ])
}

fn ar2_three_mode() -> Vec<ModeDynamics> {
    [[1.5, -0.9], [-0.5, 0.3], [0.4, 0.4]]
        .iter()
        .map(|c| ModeDynamics {
            a: Mat::from_row_slice(1, 2, c),
            sigma: Mat::identity(1, 1),
            mu: None,
        })
        .collect()
}

fn slds_three_mode() -> Vec<ModeDynamics> {
    let all = var1_five_mode();
    vec![all[0].clone(), all[2].clone(), all[4].clone()]
}

fn sparse_slds() -> Vec<ModeDynamics> {
    modes_with_identity_noise(vec![
        mat3([0.8, -0.2, 0.0, -0.2, 0.8, 0.0, 0.0, 0.0, 0.0]),
        mat3([-0.2, 0.0, 0.8, 0.8, 0.0, -0.2, 0.0, 0.0, 0.0]),
    ])
}

fn mssv_modes() -> Vec<ModeDynamics> {
    // Shared persistence 0.95; stationary log-volatility levels −1, 0.5 and 2.
    [-0.05, 0.025, 0.1]
        .iter()
        .map(|&m| ModeDynamics {
            a: Mat::from_element(1, 1, 0.95),
            sigma: Mat::from_element(1, 1, 0.02),
            mu: Some(Vector::from_element(1, m)),
        })
        .collect()
}

/// Spectral radius of the companion form of the dynamics.
pub fn spectral_radius(a: &Mat) -> f64 {
    let l = a.nrows();
    let m = a.ncols();
    let comp = if l == m {
        a.clone()
    } else {
        let mut c = Mat::zeros(m, m);
        c.view_mut((0, 0), (l, m)).copy_from(a);
        for i in l..m {
            c[(i, i - l)] = 1.0;
        }
        c
    };
    comp.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max)
}

pub fn generate_synthetic<R: Rng + ?Sized>(scenario: &Scenario, t_len: usize, rng: &mut R) -> Result<SyntheticData> {
    let p_self = 0.98;
    let custom = match scenario {
        Scenario::Var1FiveMode => CustomScenario {
            shape: ModelShape::Ar { d: 3, order: 1 },
            dynamics: var1_five_mode(),
            trans: sticky_uniform_transitions(5, p_self),
            emission: Emission::Linear,
            measurement: None,
            modes: None,
        },
        Scenario::Ar2ThreeMode => CustomScenario {
            shape: ModelShape::Ar { d: 1, order: 2 },
            dynamics: ar2_three_mode(),
            trans: sticky_uniform_transitions(3, p_self),
            emission: Emission::Linear,
            measurement: None,
            modes: None,
        },
        Scenario::SldsThreeMode => CustomScenario {
            shape: ModelShape::Slds { d: 3, n: 3 },
            dynamics: slds_three_mode(),
            trans: sticky_uniform_transitions(3, p_self),
            emission: Emission::Linear,
            measurement: Some(Mat::identity(3, 3)),
            modes: None,
        },
        Scenario::SparseSlds => CustomScenario {
            shape: ModelShape::Slds { d: 2, n: 3 },
            dynamics: sparse_slds(),
            trans: sticky_uniform_transitions(2, p_self),
            emission: Emission::Linear,
            measurement: Some(Mat::identity(2, 2)),
            modes: None,
        },
        Scenario::Mssv => CustomScenario {
            shape: ModelShape::Slds { d: 1, n: 1 },
            dynamics: mssv_modes(),
            trans: sticky_uniform_transitions(3, 0.995),
            emission: Emission::Volatility,
            measurement: None,
            modes: None,
        },
        Scenario::Custom(c) => c.clone(),
    };
    simulate_scenario(&custom, t_len, rng)
}

pub fn simulate_scenario<R: Rng + ?Sized>(s: &CustomScenario, t_len: usize, rng: &mut R) -> Result<SyntheticData> {
    s.trans.check()?;
    if s.dynamics.len() != s.trans.num_modes() {
        return Err(Error::param("scenario dynamics and transitions disagree on the number of modes"));
    }
    for (k, d) in s.dynamics.iter().enumerate() {
        if d.a.nrows() != s.shape.psi_dim() || d.a.ncols() != s.shape.regressor_dim() {
            return Err(Error::param(format!("mode {} dynamics have the wrong shape", k + 1)));
        }
        let rho = spectral_radius(&d.a);
        if rho >= 1.0 {
            log::warn!("mode {} dynamics are unstable (spectral radius {rho:.3})", k + 1);
        }
    }
    let z = match &s.modes {
        Some(z) => {
            if z.iter().any(|&k| k >= s.dynamics.len()) {
                return Err(Error::param("fixed mode sequence uses an undefined mode"));
            }
            z.clone()
        }
        None => {
            if t_len == 0 {
                return Err(Error::param("series length must be positive"));
            }
            sample_mode_chain(&s.trans, t_len, rng)
        }
    };
    let (observations, x) = match s.shape {
        ModelShape::Ar { d, order } => {
            let context = vec![Vector::zeros(d); order];
            (simulate_ar(&context, &z, &s.dynamics, order, rng)?, None)
        }
        ModelShape::Slds { n, .. } => {
            let x = simulate_states(&Vector::zeros(n), &z, &s.dynamics, rng)?;
            let y = match s.emission {
                Emission::Linear => {
                    let r = s
                        .measurement
                        .as_ref()
                        .ok_or_else(|| Error::param("linear SLDS scenario needs a measurement covariance"))?;
                    emit_linear(&x, &[r.clone()], rng)?
                }
                Emission::Volatility => x
                    .iter()
                    .map(|xt| Vector::from_element(1, (xt[0] / 2.0).exp() * std_normal_vector(1, rng)[0]))
                    .collect(),
            };
            (Observations::new(y), Some(x))
        }
    };
    Ok(SyntheticData {
        shape: s.shape,
        observations,
        z,
        x,
        dynamics: s.dynamics.clone(),
        trans: s.trans.clone(),
        measurement: s.measurement.clone(),
    })
}

fn noise_factors(dynamics: &[ModeDynamics]) -> Result<Vec<Mat>> {
    dynamics
        .iter()
        .map(|d| Ok(cholesky(&d.sigma, "scenario process noise")?.l()))
        .collect()
}

/// y_t = A^(z_t)[y_{t−1}; …; y_{t−r}] + μ + e_t given the r context values.
pub fn simulate_ar<R: Rng + ?Sized>(
    context: &[Vector],
    z: &[usize],
    dynamics: &[ModeDynamics],
    order: usize,
    rng: &mut R,
) -> Result<Observations> {
    let chols = noise_factors(dynamics)?;
    let mut hist: Vec<Vector> = context[context.len() - order..].to_vec();
    let d = hist[0].len();
    let mut y = Vec::with_capacity(z.len());
    for &k in z {
        let mut psibar = Vector::zeros(d * order);
        for lag in 1..=order {
            psibar.rows_mut((lag - 1) * d, d).copy_from(&hist[hist.len() - lag]);
        }
        let yt = dynamics[k].predict(&psibar) + &chols[k] * std_normal_vector(d, rng);
        hist.push(yt.clone());
        y.push(yt);
    }
    Ok(Observations {
        context: context.to_vec(),
        y,
    })
}

pub fn simulate_states<R: Rng + ?Sized>(
    x0: &Vector,
    z: &[usize],
    dynamics: &[ModeDynamics],
    rng: &mut R,
) -> Result<Vec<Vector>> {
    let chols = noise_factors(dynamics)?;
    let n = x0.len();
    let mut prev = x0.clone();
    let mut x = Vec::with_capacity(z.len());
    for &k in z {
        prev = dynamics[k].predict(&prev) + &chols[k] * std_normal_vector(n, rng);
        x.push(prev.clone());
    }
    Ok(x)
}

/// y_t = [I 0] x_t + w_t with one shared covariance or one per step.
pub fn emit_linear<R: Rng + ?Sized>(x: &[Vector], r: &[Mat], rng: &mut R) -> Result<Vec<Vector>> {
    let chols = r
        .iter()
        .map(|m| Ok(cholesky(m, "measurement noise")?.l()))
        .collect::<Result<Vec<_>>>()?;
    let d = r[0].nrows();
    Ok(x.iter()
        .enumerate()
        .map(|(t, xt)| {
            let c = &chols[if chols.len() == 1 { 0 } else { t }];
            xt.rows(0, d).into_owned() + c * std_normal_vector(d, rng)
        })
        .collect())
}

/// Fraction of steps whose mode equals the previous one.
pub fn empirical_self_transition(z: &[usize]) -> f64 {
    if z.len() < 2 {
        return f64::NAN;
    }
    z.windows(2).filter(|w| w[0] == w[1]).count() as f64 / (z.len() - 1) as f64
}
