//! Dense linear-algebra helpers shared by the estimators.
//!
//! Positive-definite systems are always solved through a Cholesky factor.
//! Pseudo-inverses truncate singular values at a relative cutoff of the
//! largest one.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{LdrrError, Result};

/// Relative cutoff used for every Moore-Penrose inverse.
pub const PINV_RTOL: f64 = 1e-10;

/// Solves `A X = B` for symmetric positive definite `A`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or(LdrrError::NotPositiveDefinite(name))?;
    Ok(chol.solve(b))
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
pub fn sym_eigen_desc(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let sym = symmetrize(a);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `(A + A^T) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Singular values in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let mut s = a.clone().svd(false, false).singular_values;
    s.as_mut_slice().sort_by(|x, y| y.total_cmp(x));
    s
}

/// Number of singular values above `rtol * sigma_max`.
pub fn numerical_rank(a: &DMatrix<f64>, rtol: f64) -> usize {
    let s = singular_values(a);
    let Some(&smax) = s.iter().next() else {
        return 0;
    };
    if smax <= 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rtol * smax).count()
}

/// Moore-Penrose inverse with singular values below `rtol * sigma_max` dropped.
pub fn pinv(a: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return DMatrix::zeros(n, m);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut out = DMatrix::zeros(n, m);
    if smax <= 0.0 {
        return out;
    }
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > rtol * smax {
            out += vt.row(k).transpose() * u.column(k).transpose() * (1.0 / s);
        }
    }
    out
}

/// Square root of the pseudo-inverse of a symmetric PSD matrix, `(A^+)^{1/2}`,
/// built from its eigendecomposition. Eigenvalues at or below
/// `rtol * lambda_max` are treated as zero.
pub fn pinv_sqrt_psd(a: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let (vals, vecs) = sym_eigen_desc(a);
    let lmax = vals.iter().cloned().fold(0.0, f64::max);
    let mut out = DMatrix::zeros(n, n);
    if lmax <= 0.0 {
        return out;
    }
    for k in 0..n {
        let v = vals[k];
        if v > rtol * lmax {
            let col = vecs.column(k);
            out += col * col.transpose() * (1.0 / v.sqrt());
        }
    }
    out
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff: shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Index of the smallest entry; ties resolve to the smallest index.
pub fn argmin(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v < best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Column means of `x` (rows are samples).
pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows();
    let mut mean = DVector::zeros(x.ncols());
    if n == 0 {
        return mean;
    }
    for j in 0..x.ncols() {
        mean[j] = x.column(j).sum() / n as f64;
    }
    mean
}
