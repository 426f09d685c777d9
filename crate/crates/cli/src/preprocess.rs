//! Series transforms applied before fitting: log-squared returns, first
//! differences, per-component centering and scaling, and max-abs scaling.
//!
//! Transforms run in that fixed order. The affine steps (centering, scaling,
//! max-abs) record their constants so they can be reapplied to held-out data
//! and inverted.

use hdp_slds::linalg::Vector;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Floor on y² before taking logs, so zero returns stay finite.
pub const LOG_SQUARED_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessSpec {
    pub log_squared: bool,
    pub first_difference: bool,
    pub center: bool,
    pub scale: bool,
    /// Rescale so the largest absolute entry equals this value.
    pub max_abs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessMeta {
    pub spec: PreprocessSpec,
    pub log_squared_floor: f64,
    /// Entries whose square fell below the floor.
    pub clamped: usize,
    pub mean: Option<Vec<f64>>,
    pub scale: Option<Vec<f64>>,
    pub max_abs_factor: Option<f64>,
    pub rows_in: usize,
    pub rows_out: usize,
}

pub fn log_squared(y: &[Vector]) -> (Vec<Vector>, usize) {
    let mut clamped = 0;
    let out = y
        .iter()
        .map(|v| {
            v.map(|x| {
                let sq = x * x;
                if sq < LOG_SQUARED_FLOOR {
                    clamped += 1;
                }
                sq.max(LOG_SQUARED_FLOOR).ln()
            })
        })
        .collect();
    (out, clamped)
}

pub fn first_difference(y: &[Vector]) -> Vec<Vector> {
    y.windows(2).map(|w| &w[1] - &w[0]).collect()
}

fn column_moments(y: &[Vector]) -> (Vec<f64>, Vec<f64>) {
    let d = y[0].len();
    let n = y.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| y.iter().map(|v| v[j]).sum::<f64>() / n).collect();
    let sd = (0..d)
        .map(|j| (y.iter().map(|v| (v[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    (mean, sd)
}

fn affine(y: &[Vector], shift: &[f64], divide: &[f64]) -> Vec<Vector> {
    y.iter()
        .map(|v| Vector::from_fn(v.len(), |j, _| (v[j] - shift[j]) / divide[j]))
        .collect()
}

fn check_input(y: &[Vector]) -> Result<usize> {
    let d = y.first().map(|v| v.len()).ok_or_else(|| CliError::config("empty series"))?;
    if y.iter().any(|v| v.len() != d) {
        return Err(CliError::config("rows have different lengths"));
    }
    Ok(d)
}

/// Learn the affine constants from `y` and transform it.
pub fn fit_transform(y: &[Vector], spec: &PreprocessSpec) -> Result<(Vec<Vector>, PreprocessMeta)> {
    let d = check_input(y)?;
    let rows_in = y.len();
    let (mut cur, clamped) = if spec.log_squared { log_squared(y) } else { (y.to_vec(), 0) };
    if spec.first_difference {
        if cur.len() < 2 {
            return Err(CliError::config("first differences need at least two rows"));
        }
        cur = first_difference(&cur);
    }
    let (mut mean, mut scale) = (None, None);
    if spec.center || spec.scale {
        let (m, sd) = column_moments(&cur);
        let shift = if spec.center { m } else { vec![0.0; d] };
        // Constant components are left unscaled.
        let divide: Vec<f64> = if spec.scale {
            sd.iter().map(|&s| if s > 0.0 { s } else { 1.0 }).collect()
        } else {
            vec![1.0; d]
        };
        cur = affine(&cur, &shift, &divide);
        mean = Some(shift);
        scale = Some(divide);
    }
    let mut max_abs_factor = None;
    if let Some(target) = spec.max_abs {
        if !(target > 0.0 && target.is_finite()) {
            return Err(CliError::config("max_abs must be a positive number"));
        }
        let peak = cur.iter().flat_map(|v| v.iter()).fold(0.0f64, |a, x| a.max(x.abs()));
        let f = if peak > 0.0 { target / peak } else { 1.0 };
        cur.iter_mut().for_each(|v| *v *= f);
        max_abs_factor = Some(f);
    }
    let meta = PreprocessMeta {
        spec: spec.clone(),
        log_squared_floor: LOG_SQUARED_FLOOR,
        clamped,
        mean,
        scale,
        max_abs_factor,
        rows_in,
        rows_out: cur.len(),
    };
    Ok((cur, meta))
}

/// Apply previously learned transforms (e.g. to held-out data).
pub fn transform_with(y: &[Vector], meta: &PreprocessMeta) -> Result<Vec<Vector>> {
    let d = check_input(y)?;
    let mut cur = if meta.spec.log_squared { log_squared(y).0 } else { y.to_vec() };
    if meta.spec.first_difference {
        cur = first_difference(&cur);
    }
    if let (Some(m), Some(s)) = (&meta.mean, &meta.scale) {
        if m.len() != d || s.len() != d {
            return Err(CliError::config("preprocessing constants do not match the series dimension"));
        }
        cur = affine(&cur, m, s);
    }
    if let Some(f) = meta.max_abs_factor {
        cur.iter_mut().for_each(|v| *v *= f);
    }
    Ok(cur)
}

/// Undo the affine steps; log-squaring and differencing are not invertible here.
pub fn invert_affine(y: &[Vector], meta: &PreprocessMeta) -> Vec<Vector> {
    y.iter()
        .map(|v| {
            let mut out = v.clone();
            if let Some(f) = meta.max_abs_factor {
                out /= f;
            }
            if let (Some(m), Some(s)) = (&meta.mean, &meta.scale) {
                out = Vector::from_fn(out.len(), |j, _| out[j] * s[j] + m[j]);
            }
            out
        })
        .collect()
}
