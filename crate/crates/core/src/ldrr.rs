//! The plug-in discriminant classifier built from a penalized regression fit.
//!
//! Pipeline: center (and optionally scale) the training features, fit
//! `B_hat`, then
//!
//! ```text
//! M_hat  = X^T Y (Y^T Y)^{-1},   D_pi_hat = Y^T Y / n
//! H_hat  = D_pi_hat - n^{-1} (X B_hat)^T (X B_hat)
//! B*_hat = B_hat H_hat^+
//! G_l(x) = mu_l^T b*_l - 2 x^T b*_l - 2 log pi_l      (predict argmin_l)
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{check_shape, LdrrError, Result};
use crate::linalg::{argmin, column_means, pinv, singular_values, symmetrize, PINV_RTOL};
use crate::regression::{PenaltyConfig, RegressionFit, RegressionProblem, SolverOptions};

/// `sigma_min(H_hat) < NEAR_SINGULAR_RTOL * sigma_max(H_hat)` raises the
/// near-singular flag.
pub const NEAR_SINGULAR_RTOL: f64 = 1e-8;

/// Options shared by the fitting pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitOptions {
    pub solver: SolverOptions,
    /// Rescale centered features to unit variance before fitting.
    pub standardize: bool,
}

/// Affine map applied to raw features: `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTransform {
    pub mean: DVector<f64>,
    pub scale: Option<DVector<f64>>,
}

impl FeatureTransform {
    /// Training mean, plus per-column standard deviations when `standardize`
    /// (zero-variance columns keep scale 1).
    pub fn fit(x: &DMatrix<f64>, standardize: bool) -> Self {
        let mean = column_means(x);
        let scale = standardize.then(|| {
            let n = x.nrows().max(1) as f64;
            DVector::from_iterator(
                x.ncols(),
                x.column_iter().enumerate().map(|(j, c)| {
                    let var = c.iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / n;
                    if var > 0.0 { var.sqrt() } else { 1.0 }
                }),
            )
        });
        Self { mean, scale }
    }

    pub fn identity(p: usize) -> Self {
        Self {
            mean: DVector::zeros(p),
            scale: None,
        }
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(LdrrError::DimensionMismatch {
                expected: format!("{} feature columns", self.mean.len()),
                found: format!("{}", x.ncols()),
            });
        }
        let mut out = x.clone();
        for (j, mut c) in out.column_iter_mut().enumerate() {
            c.add_scalar_mut(-self.mean[j]);
            if let Some(s) = &self.scale {
                c /= s[j];
            }
        }
        Ok(out)
    }
}

/// Sample class means and proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    /// `p x L`; column `l` is the mean of the class-`l` rows of `X`.
    pub means: DMatrix<f64>,
    pub pi: DVector<f64>,
    pub counts: Vec<usize>,
}

/// `M_hat = X^T Y (Y^T Y)^{-1}` and `pi_hat = counts / n`.
pub fn estimate_class_stats(data: &LabeledDataset) -> Result<ClassStats> {
    data.require_all_classes()?;
    let counts = data.class_counts();
    let n = data.n_samples() as f64;
    let mut means = data.x().tr_mul(data.y());
    for (k, mut c) in means.column_iter_mut().enumerate() {
        c /= counts[k] as f64;
    }
    let pi = DVector::from_iterator(counts.len(), counts.iter().map(|&c| c as f64 / n));
    Ok(ClassStats { means, pi, counts })
}

/// `H_hat = D_pi_hat - n^{-1} (X B_hat)^T (X B_hat)`, symmetrized.
pub fn estimate_h(data: &LabeledDataset, b_hat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_shape("B_hat", (data.n_features(), data.n_classes()), b_hat.shape())?;
    let n = data.n_samples() as f64;
    let fitted = data.x() * b_hat;
    let counts = data.class_counts();
    let d_pi = DMatrix::from_diagonal(&DVector::from_iterator(counts.len(), counts.iter().map(|&c| c as f64 / n)));
    Ok(symmetrize(&(d_pi - fitted.tr_mul(&fitted) / n)))
}

/// `B*_hat = B_hat H_hat^+` with its conditioning diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct BStarEstimate {
    pub b_star: DMatrix<f64>,
    pub h_min_singular: f64,
    pub h_max_singular: f64,
}

impl BStarEstimate {
    pub fn near_singular(&self) -> bool {
        self.h_min_singular < NEAR_SINGULAR_RTOL * self.h_max_singular
    }
}

/// Pseudo-inverse truncated at `1e-10 * sigma_max(H_hat)`.
pub fn estimate_b_star(b_hat: &DMatrix<f64>, h_hat: &DMatrix<f64>) -> Result<BStarEstimate> {
    let l = b_hat.ncols();
    check_shape("H_hat", (l, l), h_hat.shape())?;
    let s = singular_values(h_hat);
    let (h_max_singular, h_min_singular) = match (s.iter().next(), s.iter().last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => (0.0, 0.0),
    };
    Ok(BStarEstimate {
        b_star: b_hat * pinv(h_hat, PINV_RTOL),
        h_min_singular,
        h_max_singular,
    })
}

/// Regression diagnostics kept with a fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSummary {
    pub objective: f64,
    pub n_iters: usize,
    pub converged: bool,
    pub selected_rank: Option<usize>,
}

impl From<&RegressionFit> for RegressionSummary {
    fn from(fit: &RegressionFit) -> Self {
        Self {
            objective: fit.objective,
            n_iters: fit.n_iters,
            converged: fit.converged,
            selected_rank: fit.selected_rank,
        }
    }
}

/// Fitted plug-in discriminant classifier. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LdrrModel {
    pub transform: FeatureTransform,
    pub b_hat: DMatrix<f64>,
    pub h_hat: DMatrix<f64>,
    pub b_star_hat: DMatrix<f64>,
    pub stats: ClassStats,
    pub penalty: PenaltyConfig,
    pub h_min_singular: f64,
    pub h_max_singular: f64,
    pub regression: RegressionSummary,
}

/// Fits `B_hat` on the transformed features and assembles the classifier.
pub fn fit_ldrr(data: &LabeledDataset, penalty: &PenaltyConfig, opts: &FitOptions) -> Result<LdrrModel> {
    let prepared = PreparedData::new(data, opts.standardize)?;
    let fit = prepared.regress(penalty, None, &opts.solver)?;
    LdrrModel::assemble(&prepared, &fit)
}

/// Training data after the feature transform, with the transform kept.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub transform: FeatureTransform,
    pub data: LabeledDataset,
}

impl PreparedData {
    pub fn new(data: &LabeledDataset, standardize: bool) -> Result<Self> {
        data.require_all_classes()?;
        let transform = FeatureTransform::fit(data.x(), standardize);
        let data = data.with_features(transform.apply(data.x())?)?;
        Ok(Self { transform, data })
    }

    pub fn problem(&self) -> Result<RegressionProblem<'_>> {
        RegressionProblem::new(self.data.x(), self.data.y())
    }

    pub fn regress(&self, penalty: &PenaltyConfig, warm: Option<&DMatrix<f64>>, solver: &SolverOptions) -> Result<RegressionFit> {
        self.problem()?.fit(penalty, warm, solver)
    }
}

impl LdrrModel {
    /// Builds the classifier from a regression fit on `prepared` data.
    pub fn assemble(prepared: &PreparedData, fit: &RegressionFit) -> Result<Self> {
        let data = &prepared.data;
        let stats = estimate_class_stats(data)?;
        let h_hat = estimate_h(data, &fit.b_hat)?;
        let est = estimate_b_star(&fit.b_hat, &h_hat)?;
        Ok(Self {
            transform: prepared.transform.clone(),
            b_hat: fit.b_hat.clone(),
            h_hat,
            b_star_hat: est.b_star,
            stats,
            penalty: fit.penalty,
            h_min_singular: est.h_min_singular,
            h_max_singular: est.h_max_singular,
            regression: fit.into(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.b_hat.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.b_hat.ncols()
    }

    /// True when `H_hat` is numerically close to singular.
    pub fn h_near_singular(&self) -> bool {
        self.h_min_singular < NEAR_SINGULAR_RTOL * self.h_max_singular
    }

    /// Scores `mu_l^T b*_l - 2 z^T b*_l - 2 log pi_l` for an already
    /// transformed feature vector `z`; lower is more likely.
    pub fn discriminant_scores(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_shape("x", (self.n_features(), 1), z.shape())?;
        let proj = self.b_star_hat.tr_mul(z);
        Ok(DVector::from_iterator(
            self.n_classes(),
            (0..self.n_classes()).map(|k| self.offset(k) - 2.0 * proj[k]),
        ))
    }

    fn offset(&self, k: usize) -> f64 {
        self.stats.means.column(k).dot(&self.b_star_hat.column(k)) - 2.0 * self.stats.pi[k].ln()
    }

    /// Score matrix (`m x L`) for raw feature rows.
    pub fn score_rows(&self, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let z = self.transform.apply(x_new)?;
        let mut scores = &z * &self.b_star_hat * -2.0;
        for k in 0..self.n_classes() {
            scores.column_mut(k).add_scalar_mut(self.offset(k));
        }
        Ok(scores)
    }

    /// Predicted class index per raw feature row; ties go to the smallest index.
    pub fn predict(&self, x_new: &DMatrix<f64>) -> Result<Vec<usize>> {
        let scores = self.score_rows(x_new)?;
        Ok(scores.row_iter().map(|r| argmin(r.iter().copied())).collect())
    }
}
