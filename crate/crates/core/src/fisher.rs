//! Reduced-dimension variant: map `x -> z = B_hat^T x` and run Fisher's
//! discriminant analysis in the `L`-dimensional image.
//!
//! With `Z = X B_hat` and `P_Y` the projector onto the label indicators,
//! `C_b = n^{-1} Z^T P_Y Z` and `C_w = n^{-1} Z^T (I - P_Y) Z`. Directions
//! maximize `a^T C_b a` under `C_w`-orthonormality and come from the
//! eigenvectors `u_k` of `W C_b W`, `W = (C_w^+)^{1/2}`, as `a_k = W u_k`.

use nalgebra::{DMatrix, DVector};

use crate::dataset::LabeledDataset;
use crate::error::{check_shape, LdrrError, Result};
use crate::ldrr::{estimate_class_stats, ClassStats, FeatureTransform, FitOptions, PreparedData, RegressionSummary};
use crate::linalg::{argmin, pinv_sqrt_psd, sym_eigen_desc, symmetrize, PINV_RTOL};
use crate::mixture::MixtureModel;
use crate::regression::{PenaltyConfig, RegressionFit};

/// Between- and within-class scatter of `Z = X B_hat`.
///
/// `P_Y` is applied through per-class means of `Z`; no `n x n` matrix is formed.
pub fn class_scatter_matrices(data: &LabeledDataset, b_hat: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_shape("B_hat", (data.n_features(), data.n_classes()), b_hat.shape())?;
    data.require_all_classes()?;
    let n = data.n_samples() as f64;
    let l = b_hat.ncols();
    let z = data.x() * b_hat;
    let counts = data.class_counts();
    let mut class_means = DMatrix::<f64>::zeros(data.n_classes(), l);
    for (i, &c) in data.labels().iter().enumerate() {
        let mut row = class_means.row_mut(c);
        row += z.row(i);
    }
    for (k, mut row) in class_means.row_iter_mut().enumerate() {
        row /= counts[k] as f64;
    }
    let mut c_b = DMatrix::zeros(l, l);
    for (k, row) in class_means.row_iter().enumerate() {
        c_b += row.transpose() * row * counts[k] as f64;
    }
    let mut resid = z;
    for (i, &c) in data.labels().iter().enumerate() {
        let mut row = resid.row_mut(i);
        row -= class_means.row(c);
    }
    let c_w = resid.tr_mul(&resid);
    Ok((symmetrize(&(c_b / n)), symmetrize(&(c_w / n))))
}

/// Fisher directions in `z`-space.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherDirections {
    /// `L x K`; column `k` is `a_k`.
    pub directions: DMatrix<f64>,
    /// All eigenvalues of `W C_b W`, descending.
    pub eigenvalues: DVector<f64>,
    /// Numerical rank of `W C_b W`.
    pub rank: usize,
}

/// Top-`k` generalized eigenvectors of `(C_b, C_w)`, normalized so that
/// `A^T C_w A = I`. `k = None` selects `min(L - 1, rank)`.
///
/// Each direction is signed so its first nonzero entry is positive.
pub fn fisher_directions(c_b: &DMatrix<f64>, c_w: &DMatrix<f64>, k: Option<usize>) -> Result<FisherDirections> {
    let l = c_b.nrows();
    check_shape("C_b", (l, l), c_b.shape())?;
    check_shape("C_w", (l, l), c_w.shape())?;
    let w = pinv_sqrt_psd(c_w, PINV_RTOL);
    let s = symmetrize(&(&w * c_b * &w));
    let (vals, vecs) = sym_eigen_desc(&s);
    let top = vals.iter().cloned().fold(0.0, f64::max);
    let rank = if top > 0.0 { vals.iter().filter(|&&v| v > PINV_RTOL * top).count() } else { 0 };
    let k = match k {
        None => rank.min(l.saturating_sub(1)),
        Some(0) => return Err(LdrrError::InvalidArgument("K must be >= 1".into())),
        Some(k) if k > rank => return Err(LdrrError::KTooLarge { k, rank }),
        Some(k) => k,
    };
    let mut directions = &w * vecs.columns(0, k);
    for mut col in directions.column_iter_mut() {
        let scale = col.amax();
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-12 * scale) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
    Ok(FisherDirections {
        directions,
        eigenvalues: vals,
        rank,
    })
}

/// Fitted reduced-dimension classifier. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LdrrFModel {
    pub transform: FeatureTransform,
    pub b_hat: DMatrix<f64>,
    pub c_b: DMatrix<f64>,
    pub c_w: DMatrix<f64>,
    /// `L x K`.
    pub directions: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub stats: ClassStats,
    pub penalty: PenaltyConfig,
    pub regression: RegressionSummary,
}

/// Regression fit, scatter matrices and `k` directions (`None`: default `K`).
pub fn fit_ldrr_f(data: &LabeledDataset, penalty: &PenaltyConfig, k: Option<usize>, opts: &FitOptions) -> Result<LdrrFModel> {
    let prepared = PreparedData::new(data, opts.standardize)?;
    let fit = prepared.regress(penalty, None, &opts.solver)?;
    LdrrFModel::assemble(&prepared, &fit, k)
}

impl LdrrFModel {
    pub fn assemble(prepared: &PreparedData, fit: &RegressionFit, k: Option<usize>) -> Result<Self> {
        let data = &prepared.data;
        let stats = estimate_class_stats(data)?;
        let (c_b, c_w) = class_scatter_matrices(data, &fit.b_hat)?;
        let dirs = fisher_directions(&c_b, &c_w, k)?;
        Ok(Self {
            transform: prepared.transform.clone(),
            b_hat: fit.b_hat.clone(),
            c_b,
            c_w,
            directions: dirs.directions,
            eigenvalues: dirs.eigenvalues,
            stats,
            penalty: fit.penalty,
            regression: fit.into(),
        })
    }

    /// The population counterpart: `B`, `C_b = B^T M D_pi M^T B`,
    /// `C_w = B^T Sigma_W B`, true means and priors. Requires a centered model.
    pub fn from_population(model: &MixtureModel, k: Option<usize>) -> Result<Self> {
        let b = model.population_b()?;
        let d_pi = DMatrix::from_diagonal(model.pi());
        let mb = model.means().tr_mul(&b);
        let c_b = symmetrize(&(mb.transpose() * d_pi * &mb));
        let c_w = symmetrize(&(b.transpose() * model.sigma_w() * &b));
        let dirs = fisher_directions(&c_b, &c_w, k)?;
        Ok(Self {
            transform: FeatureTransform::identity(model.n_features()),
            b_hat: b,
            c_b,
            c_w,
            directions: dirs.directions,
            eigenvalues: dirs.eigenvalues,
            stats: ClassStats {
                means: model.means().clone(),
                pi: model.pi().clone(),
                counts: Vec::new(),
            },
            penalty: PenaltyConfig::None,
            regression: RegressionSummary {
                objective: f64::NAN,
                n_iters: 0,
                converged: true,
                selected_rank: None,
            },
        })
    }

    pub fn n_features(&self) -> usize {
        self.b_hat.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.b_hat.ncols()
    }

    pub fn k(&self) -> usize {
        self.directions.ncols()
    }

    /// `B_hat A` (`p x K`): raw-space map to discriminant coordinates.
    pub fn feature_map(&self) -> DMatrix<f64> {
        &self.b_hat * &self.directions
    }

    /// Rows `(a_1^T B_hat^T x, ..., a_K^T B_hat^T x)` for centered (and
    /// scaled, if configured) raw rows.
    pub fn project(&self, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let z = self.transform.apply(x_new)?;
        Ok(z * self.feature_map())
    }

    /// `||A^T B_hat^T (z - mu_l)||^2 - 2 log pi_l` for every class.
    fn score_projected(&self, coords: &DMatrix<f64>) -> DMatrix<f64> {
        let class_coords = self.stats.means.tr_mul(&self.feature_map());
        let (m, l) = (coords.nrows(), self.n_classes());
        DMatrix::from_fn(m, l, |i, k| {
            (coords.row(i) - class_coords.row(k)).norm_squared() - 2.0 * self.stats.pi[k].ln()
        })
    }

    /// Score matrix (`m x L`) for raw feature rows.
    pub fn score_rows(&self, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.score_projected(&self.project(x_new)?))
    }

    /// Predicted class per raw row; ties go to the smallest index.
    pub fn predict(&self, x_new: &DMatrix<f64>) -> Result<Vec<usize>> {
        let scores = self.score_rows(x_new)?;
        Ok(scores.row_iter().map(|r| argmin(r.iter().copied())).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    #[test]
    fn diagonal_pencil() {
        let f = fisher_directions(&diag(&[4.0, 1.0]), &DMatrix::identity(2, 2), Some(1)).unwrap();
        assert!(max_abs_diff(&f.directions, &DMatrix::from_column_slice(2, 1, &[1.0, 0.0])) < 1e-14);
        assert!((f.eigenvalues[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn rescaled_pencil() {
        let f = fisher_directions(&diag(&[4.0, 1.0]), &(DMatrix::identity(2, 2) * 4.0), Some(1)).unwrap();
        assert!(max_abs_diff(&f.directions, &DMatrix::from_column_slice(2, 1, &[0.5, 0.0])) < 1e-14);
        assert!((f.eigenvalues[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn k_too_large() {
        let err = fisher_directions(&diag(&[4.0, 0.0]), &DMatrix::identity(2, 2), Some(2)).unwrap_err();
        assert_eq!(err, LdrrError::KTooLarge { k: 2, rank: 1 });
        let f = fisher_directions(&diag(&[4.0, 0.0, 0.0]), &DMatrix::identity(3, 3), None).unwrap();
        assert_eq!(f.directions.ncols(), 1);
        let f = fisher_directions(&DMatrix::zeros(3, 3), &DMatrix::identity(3, 3), None).unwrap();
        assert_eq!(f.directions.ncols(), 0);
    }

    #[test]
    fn scatter_of_zero_and_singletons() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 3.0, 3.0]);
        let d = LabeledDataset::from_labels(x, vec![0, 1, 2], 3).unwrap();
        let (cb, cw) = class_scatter_matrices(&d, &DMatrix::zeros(2, 3)).unwrap();
        assert_eq!(cb, DMatrix::zeros(3, 3));
        assert_eq!(cw, DMatrix::zeros(3, 3));
        let b = DMatrix::from_fn(2, 3, |i, j| (i + 2 * j) as f64 - 1.5);
        let (_, cw) = class_scatter_matrices(&d, &b).unwrap();
        assert!(cw.amax() < 1e-15);
    }
}
