//! Evaluation: optimal-mapping Hamming distance, held-out predictive
//! likelihood, windowed change-point ROC and mode-count summaries.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::dynamics::{ModelShape, PseudoObsRegression};
use crate::error::{Error, Result};
use crate::gibbs::{ModelConfig, Observations, TraceRecord};
use crate::hdp::sample_mode_chain;
use crate::linalg::{log_sum_exp, Mat};
use crate::modes::mode_log_likelihoods;
use crate::states::kalman_log_likelihood;

/// Injective map from estimated labels to true labels; `None` marks an
/// estimated label left without a partner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMapping {
    /// (estimated label, matched true label), sorted by estimated label.
    pub pairs: Vec<(usize, Option<usize>)>,
    pub overlap: usize,
}

impl LabelMapping {
    pub fn map(&self, est: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == est).and_then(|p| p.1)
    }
}

/// Maximum-weight perfect matching on a square matrix. Returns the total
/// weight and the column assigned to each row.
fn assignment_max(w: &[Vec<i64>]) -> (i64, Vec<usize>) {
    let n = w.len();
    if n == 0 {
        return (0, Vec::new());
    }
    // Shortest augmenting paths with potentials on cost = −w, 1-based with a virtual column 0.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = -w[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    let total = row_to_col.iter().enumerate().map(|(i, &j)| w[i][j]).sum();
    (total, row_to_col)
}

fn sub_optimum(w: &[Vec<i64>], rows: &[usize], cols: &[usize]) -> i64 {
    let sub: Vec<Vec<i64>> = rows.iter().map(|&i| cols.iter().map(|&j| w[i][j]).collect()).collect();
    assignment_max(&sub).0
}

/// Confusion counts between the distinct labels of each sequence, padded square.
fn confusion(z_est: &[usize], z_true: &[usize]) -> Result<(Vec<usize>, Vec<usize>, Vec<Vec<i64>>)> {
    if z_est.len() != z_true.len() {
        return Err(Error::param(format!(
            "label sequences differ in length ({} vs {})",
            z_est.len(),
            z_true.len()
        )));
    }
    if z_est.is_empty() {
        return Err(Error::param("label sequences are empty"));
    }
    let est: Vec<usize> = z_est.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let tru: Vec<usize> = z_true.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let s = est.len().max(tru.len());
    let mut w = vec![vec![0i64; s]; s];
    for (a, b) in z_est.iter().zip(z_true) {
        let i = est.binary_search(a).unwrap_or_default();
        let j = tru.binary_search(b).unwrap_or_default();
        w[i][j] += 1;
    }
    Ok((est, tru, w))
}

/// Overlap-maximizing injective label map. Among optimal maps the
/// lexicographically smallest (over estimated labels in increasing order,
/// with "unmatched" ordered after every true label) is returned.
pub fn optimal_label_mapping(z_est: &[usize], z_true: &[usize]) -> Result<LabelMapping> {
    let (est, tru, w) = confusion(z_est, z_true)?;
    let s = w.len();
    let best = assignment_max(&w).0;
    let mut free_rows: Vec<usize> = (0..s).collect();
    let mut free_cols: Vec<usize> = (0..s).collect();
    let mut fixed = 0i64;
    let mut pairs = Vec::with_capacity(est.len());
    for (i, &label) in est.iter().enumerate() {
        free_rows.retain(|&r| r != i);
        // Columns ≥ tru.len() are padding; trying one of them covers all.
        let mut candidates: Vec<usize> = free_cols.iter().copied().filter(|&j| j < tru.len()).collect();
        if let Some(&pad) = free_cols.iter().find(|&&j| j >= tru.len()) {
            candidates.push(pad);
        }
        let mut chosen = None;
        for j in candidates {
            let rest: Vec<usize> = free_cols.iter().copied().filter(|&c| c != j).collect();
            if fixed + w[i][j] + sub_optimum(&w, &free_rows, &rest) == best {
                chosen = Some(j);
                break;
            }
        }
        let j = chosen.ok_or_else(|| Error::numerical("label assignment lost its optimum", None))?;
        fixed += w[i][j];
        free_cols.retain(|&c| c != j);
        pairs.push((label, (j < tru.len()).then(|| tru[j])));
    }
    Ok(LabelMapping {
        pairs,
        overlap: best as usize,
    })
}

/// 1 − (maximal overlap)/T under the best injective relabeling of `z_est`.
pub fn hamming_with_optimal_mapping(z_est: &[usize], z_true: &[usize]) -> Result<f64> {
    let (_, _, w) = confusion(z_est, z_true)?;
    Ok(1.0 - assignment_max(&w).0 as f64 / z_est.len() as f64)
}

/// Label accuracy under the optimal mapping, i.e. 1 − Hamming distance.
pub fn label_accuracy(z_est: &[usize], z_true: &[usize]) -> Result<f64> {
    Ok(1.0 - hamming_with_optimal_mapping(z_est, z_true)?)
}

/// Linear-interpolation sample quantiles of `values` at each probability in `probs`.
pub fn quantiles(values: &[f64], probs: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::param("quantiles of an empty sample"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::param("quantiles of a sample containing NaN"));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    probs
        .iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(format!("quantile level {p} outside [0, 1]")));
            }
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
        })
        .collect()
}

/// Shortest interval of sorted values holding ⌈mass·n⌉ of them; ties go to the lowest start.
pub fn shortest_interval(values: &[f64], mass: f64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::param("interval of an empty sample"));
    }
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::param(format!("interval mass {mass} outside (0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let k = ((mass * v.len() as f64).ceil() as usize).clamp(1, v.len());
    let mut best = 0;
    for s in 1..=v.len() - k {
        if v[s + k - 1] - v[s] < v[best + k - 1] - v[best] {
            best = s;
        }
    }
    Ok((v[best], v[best + k - 1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeldoutMethod {
    /// Exact sum over mode sequences with the HMM forward recursion (AR models).
    ForwardSum,
    /// Mode sequences drawn from the sampled transition model with the state
    /// integrated out by a Kalman filter; the likelihoods are averaged (SLDS).
    SampledModes { draws: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeldoutResult {
    pub method: HeldoutMethod,
    /// One value per posterior sample.
    pub values: Vec<f64>,
    /// Shortest interval containing 95% of the values.
    pub interval: (f64, f64),
}

/// log Σ_z β_{z_1} Π π_{z_{t−1} z_t} Π f(t, z_t) for a T×L log-likelihood table.
pub fn hmm_log_likelihood(loglik: &Mat, beta: &[f64], pi: &Mat) -> Result<f64> {
    let (t_len, l) = loglik.shape();
    if beta.len() != l || pi.shape() != (l, l) {
        return Err(Error::param("transition model does not match the likelihood table"));
    }
    if t_len == 0 {
        return Ok(0.0);
    }
    let ln = |p: f64| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
    let mut alpha: Vec<f64> = (0..l).map(|k| ln(beta[k]) + loglik[(0, k)]).collect();
    for t in 1..t_len {
        alpha = (0..l)
            .map(|k| {
                let into: Vec<f64> = (0..l).map(|j| alpha[j] + ln(pi[(j, k)])).collect();
                log_sum_exp(&into) + loglik[(t, k)]
            })
            .collect();
    }
    Ok(log_sum_exp(&alpha))
}

/// Predictive log-likelihood of `heldout` under each posterior sample in `records`.
/// AR models use [`HeldoutMethod::ForwardSum`]; the SLDS default is 100 sampled mode sequences.
pub fn heldout_log_likelihood<R: Rng + ?Sized>(
    config: &ModelConfig,
    records: &[TraceRecord],
    heldout: &Observations,
    method: Option<HeldoutMethod>,
    rng: &mut R,
) -> Result<HeldoutResult> {
    if records.is_empty() {
        return Err(Error::param("no posterior samples for held-out evaluation"));
    }
    heldout.validate(config.shape)?;
    let method = match (config.shape, method) {
        (ModelShape::Ar { .. }, None | Some(HeldoutMethod::ForwardSum)) => HeldoutMethod::ForwardSum,
        (ModelShape::Ar { .. }, Some(m)) => {
            return Err(Error::param(format!("{m:?} is not available for AR models")));
        }
        (ModelShape::Slds { .. }, None) => HeldoutMethod::SampledModes { draws: 100 },
        (ModelShape::Slds { .. }, Some(HeldoutMethod::ForwardSum)) => {
            return Err(Error::param("the SLDS held-out likelihood needs sampled mode sequences"));
        }
        (ModelShape::Slds { .. }, Some(m)) => m,
    };
    let mut values = Vec::with_capacity(records.len());
    for rec in records {
        let trans = rec.transitions()?;
        let dynamics = rec.dynamics()?;
        let v = match (config.shape, method) {
            (ModelShape::Ar { order, .. }, _) => {
                let reg = PseudoObsRegression::autoregressive(
                    &heldout.context,
                    &heldout.y,
                    order,
                    vec![0; heldout.len()],
                )?;
                let table = mode_log_likelihoods(&reg, &dynamics)?;
                let beta: Vec<f64> = trans.beta.iter().copied().collect();
                hmm_log_likelihood(&table, &beta, &trans.pi)?
            }
            (ModelShape::Slds { .. }, HeldoutMethod::SampledModes { draws }) => {
                if draws == 0 {
                    return Err(Error::param("held-out likelihood needs at least one mode draw"));
                }
                let r = rec
                    .measurement_covariances()?
                    .ok_or_else(|| Error::param("SLDS record lacks measurement noise"))?;
                let p0 = config.initial_state_cov();
                let lls = (0..draws)
                    .map(|_| {
                        let z = sample_mode_chain(&trans, heldout.len(), rng);
                        kalman_log_likelihood(&heldout.y, &z, &dynamics, &r, &p0)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                log_sum_exp(&lls) - (draws as f64).ln()
            }
            (ModelShape::Slds { .. }, HeldoutMethod::ForwardSum) => unreachable!(),
        };
        values.push(v);
    }
    let interval = shortest_interval(&values, 0.95)?;
    Ok(HeldoutResult {
        method,
        values,
        interval,
    })
}

/// Posterior frequency of z_t ≠ z_{t−1} at each t over a set of sampled sequences (0 at t = 0).
pub fn changepoint_probabilities(samples: &[Vec<usize>]) -> Result<Vec<f64>> {
    let first = samples.first().ok_or_else(|| Error::param("no mode sequences"))?;
    let t_len = first.len();
    if samples.iter().any(|z| z.len() != t_len) {
        return Err(Error::param("mode sequences differ in length"));
    }
    let mut p = vec![0.0; t_len];
    for z in samples {
        for t in 1..t_len {
            if z[t] != z[t - 1] {
                p[t] += 1.0;
            }
        }
    }
    let n = samples.len() as f64;
    Ok(p.into_iter().map(|c| c / n).collect())
}

/// 0/1 change indicators of a single sequence, e.g. a MAP estimate.
pub fn changepoint_indicators(z: &[usize]) -> Vec<f64> {
    (0..z.len())
        .map(|t| if t > 0 && z[t] != z[t - 1] { 1.0 } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roc {
    /// Points from the (0, 0) corner at threshold +∞ down to the (1, 1) corner.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC of windowed change-point scores. The time axis is cut into consecutive
/// windows of `window` steps (the last may be shorter); a window scores the
/// maximum probability inside it and is positive when it contains an event.
pub fn windowed_roc(prob: &[f64], events: &[usize], window: usize) -> Result<Roc> {
    if window == 0 || window > prob.len() {
        return Err(Error::param(format!(
            "window of {window} steps does not fit a series of length {}",
            prob.len()
        )));
    }
    if let Some(e) = events.iter().find(|&&e| e >= prob.len()) {
        return Err(Error::param(format!("event time {e} lies outside the series")));
    }
    let scored: Vec<(f64, bool)> = prob
        .chunks(window)
        .enumerate()
        .map(|(w, c)| {
            let lo = w * window;
            let score = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (score, events.iter().any(|&e| e >= lo && e < lo + c.len()))
        })
        .collect();
    let pos = scored.iter().filter(|s| s.1).count();
    let neg = scored.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::param("ROC needs windows both with and without events"));
    }
    let mut thresholds: Vec<f64> = scored.iter().map(|s| s.0).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    for &th in &thresholds {
        let tp = scored.iter().filter(|s| s.1 && s.0 >= th).count();
        let fp = scored.iter().filter(|s| !s.1 && s.0 >= th).count();
        points.push(RocPoint {
            threshold: th,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok(Roc { points, auc })
}

/// Windowed ROC of the posterior change-point frequencies of sampled mode sequences.
pub fn changepoint_roc(samples: &[Vec<usize>], events: &[usize], window: usize) -> Result<Roc> {
    windowed_roc(&changepoint_probabilities(samples)?, events, window)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeCountSummary {
    /// Number of records with each count of active modes.
    pub histogram: BTreeMap<usize, usize>,
    /// Most frequent count; ties go to the smaller count.
    pub most_frequent: usize,
}

/// Histogram of active-mode counts over trace records.
pub fn mode_count_summary(records: &[TraceRecord]) -> Result<ModeCountSummary> {
    if records.is_empty() {
        return Err(Error::param("mode-count summary of an empty trace"));
    }
    let mut histogram = BTreeMap::new();
    for r in records {
        *histogram.entry(r.active_modes).or_insert(0) += 1;
    }
    let most_frequent = histogram
        .iter()
        .fold((0, 0), |best, (&k, &c)| if c > best.1 { (k, c) } else { best })
        .0;
    Ok(ModeCountSummary {
        histogram,
        most_frequent,
    })
}
