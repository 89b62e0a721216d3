//! Point estimation and evaluation helpers shared by the models.

use nalgebra::DMatrix;

use crate::error::{domain, Error, Result};
use crate::linalg::SemiOrthogonalMatrix;

/// Mann–Whitney AUC with average ranks for ties.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = 0.5 * ((i + 1) + (j + 1)) as f64;
        rank_sum += avg * order[i..=j].iter().filter(|&&o| labels[o]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Subtracts each column's mean.
pub fn center_columns(y: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = y.clone();
    for mut col in out.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    out
}

/// Shape and rate of the inverse gamma with the given mean and standard deviation.
pub fn invgamma_from_mean_sd(mean: f64, sd: f64) -> Result<(f64, f64)> {
    if !(mean > 0.0 && sd > 0.0 && mean.is_finite() && sd.is_finite()) {
        return Err(domain(format!(
            "mean and sd must be positive, got {mean}, {sd}"
        )));
    }
    let alpha = 2.0 + (mean / sd).powi(2);
    Ok((alpha, mean * (alpha - 1.0)))
}

/// Flips column signs so that the largest-magnitude entry (first on ties) is positive.
pub fn sign_normalize(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// First `k` right singular vectors of `m`, ordered by decreasing singular value, sign-normalized.
pub fn top_right_singular_vectors(m: &DMatrix<f64>, k: usize) -> Result<SemiOrthogonalMatrix> {
    let p = m.ncols();
    if k == 0 || k > p.min(m.nrows()) {
        return Err(Error::DimensionMismatch(format!(
            "cannot take {k} singular vectors of a {}x{p} matrix",
            m.nrows()
        )));
    }
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("v requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let mut v = DMatrix::from_fn(p, k, |i, j| vt[(idx[j], i)]);
    sign_normalize(&mut v);
    Ok(SemiOrthogonalMatrix::new_unchecked(v))
}

/// Largest principal angle (radians) between the column spaces of two semi-orthogonal matrices.
pub fn principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let s = (a.transpose() * b).singular_values();
    Ok(s.min().clamp(-1.0, 1.0).acos())
}
