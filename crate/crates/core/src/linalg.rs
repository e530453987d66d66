//! Small dense vector helpers shared by the solver stages.

use nalgebra::DMatrix;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

/// `H x` for symmetric `H`; row `i` is read as the contiguous column `i`.
pub fn sym_mul_vec(h: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let n = h.nrows();
    debug_assert_eq!(x.len(), n);
    let data = h.as_slice();
    (0..n).map(|i| dot(&data[i * n..(i + 1) * n], x)).collect()
}

/// Column `j` of a column-major square matrix.
pub fn column(h: &DMatrix<f64>, j: usize) -> &[f64] {
    let n = h.nrows();
    &h.as_slice()[j * n..(j + 1) * n]
}
