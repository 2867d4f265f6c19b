//! KKT residuals computed directly from `X` and `Y`, independent of the Gram
//! bookkeeping used by the solvers.

use nalgebra::{DMatrix, DVector};

/// Largest KKT violation of `b` for
/// `n^{-1} ||y - X b||^2 + l1 ||b||_1 + l2/2 ||b||^2`.
///
/// With `g_j = (2/n) X_j^T (y - X b)`: zero coordinates need `|g_j| <= l1`,
/// nonzero ones need `g_j = l1 sign(b_j) + l2 b_j`.
pub fn kkt_residual_elastic_net(x: &DMatrix<f64>, y: &DVector<f64>, b: &DVector<f64>, l1: f64, l2: f64) -> f64 {
    let n = x.nrows() as f64;
    let resid = y - x * b;
    let grad = x.tr_mul(&resid) * (2.0 / n);
    let mut worst = 0.0f64;
    for j in 0..b.len() {
        let v = if b[j] == 0.0 {
            (grad[j].abs() - l1).max(0.0)
        } else {
            (grad[j] - l1 * b[j].signum() - l2 * b[j]).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Largest row-wise KKT violation of `B` for the group-lasso plus ridge
/// objective with group weight `w` and ridge `r` (`r/2 ||B||_F^2`).
pub fn kkt_residual_group(x: &DMatrix<f64>, y: &DMatrix<f64>, b: &DMatrix<f64>, w: f64, r: f64) -> f64 {
    let n = x.nrows() as f64;
    let grad = x.tr_mul(&(y - x * b)) * (2.0 / n);
    let mut worst = 0.0f64;
    for j in 0..b.nrows() {
        let row = b.row(j);
        let norm = row.norm();
        let g = grad.row(j);
        let v = if norm == 0.0 {
            (g.norm() - w).max(0.0)
        } else {
            (g - row * (w / norm) - row * r).norm()
        };
        worst = worst.max(v);
    }
    worst
}
