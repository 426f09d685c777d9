//! Sparsity-preservation check for fixing C = [I_d 0]: every state component
//! seen by the observation matrix must be relevant to all modes, i.e. c_j = 0
//! whenever column j of some A^(k) is zero.

use crate::linalg::Mat;

/// `true` for each column of `a` whose entries are all within `tol` of zero.
pub fn zero_column_pattern(a: &Mat, tol: f64) -> Vec<bool> {
    (0..a.ncols())
        .map(|j| a.column(j).iter().all(|v| v.abs() <= tol))
        .collect()
}

/// Columns that are zero in at least one mode; C must vanish on these.
pub fn columns_zero_in_some_mode(patterns: &[Vec<bool>]) -> Vec<usize> {
    let n = patterns.iter().map(|p| p.len()).max().unwrap_or(0);
    (0..n)
        .filter(|&j| patterns.iter().any(|p| p.get(j).copied().unwrap_or(false)))
        .collect()
}

pub fn observation_preserves_sparsity(modes: &[Mat], c: &Mat, tol: f64) -> bool {
    let patterns: Vec<Vec<bool>> = modes.iter().map(|a| zero_column_pattern(a, tol)).collect();
    columns_zero_in_some_mode(&patterns)
        .into_iter()
        .all(|j| j < c.ncols() && c.column(j).iter().all(|v| v.abs() <= tol))
}
