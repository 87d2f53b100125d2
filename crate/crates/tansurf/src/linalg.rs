//! Numerical rank of small column families via singular values.

use nalgebra::DMatrix;

/// Outcome of a rank decision: the rank together with the singular values
/// (descending) it was based on, so reports can show their evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct RankResult {
    pub rank: usize,
    /// Singular values, largest first, of the (possibly column-rescaled)
    /// matrix actually decomposed.
    pub singular_values: Vec<f64>,
    /// Whether columns were rescaled to unit norm before the SVD.
    pub rescaled: bool,
}

/// Rank of the matrix whose columns are `cols`, counting singular values
/// above `tol` relative to the largest one.
///
/// When the non-zero column norms are badly spread (ratio above 1e3), the
/// columns are first scaled to unit norm so a single long column cannot
/// mask an independent short one.
pub fn numerical_rank(cols: &[Vec<f64>], tol: f64) -> RankResult {
    if cols.is_empty() {
        return RankResult { rank: 0, singular_values: Vec::new(), rescaled: false };
    }
    let rows = cols[0].len();
    let norms: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let max_norm = norms.iter().cloned().fold(0.0f64, f64::max);
    if max_norm == 0.0 {
        return RankResult {
            rank: 0,
            singular_values: vec![0.0; rows.min(cols.len())],
            rescaled: false,
        };
    }
    let min_nonzero = norms
        .iter()
        .cloned()
        .filter(|&n| n > 0.0)
        .fold(f64::INFINITY, f64::min);
    let rescale = max_norm > 1e3 * min_nonzero;

    let mut m = DMatrix::zeros(rows, cols.len());
    for (j, col) in cols.iter().enumerate() {
        let scale = if rescale && norms[j] > 0.0 { 1.0 / norms[j] } else { 1.0 };
        for (i, v) in col.iter().enumerate() {
            m[(i, j)] = v * scale;
        }
    }
    let mut sv: Vec<f64> = m.svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv.first().cloned().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > tol * smax).count();
    RankResult { rank, singular_values: sv, rescaled: rescale }
}
