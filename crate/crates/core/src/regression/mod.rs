//! Penalized multivariate least squares
//!
//! ```text
//! minimize_B  n^{-1} ||Y - X B||_F^2 + pen(B)
//! ```
//!
//! for the penalties in [`PenaltyConfig`]. All KKT conditions in this module
//! are stated for exactly this scaling: the gradient of the loss is
//! `-(2/n) X^T (Y - X B)`.

mod coordinate;
mod grid;
mod kkt;
mod reduced_rank;

pub use coordinate::{fit_elastic_net_column, fit_group_lasso_ridge, soft_threshold, ColumnFit, GroupFit};
pub use grid::{lambda_grid, lambda_max};
pub use kkt::{kkt_residual_elastic_net, kkt_residual_group};
pub use reduced_rank::{fit_reduced_rank, fit_reduced_rank_fixed};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_shape, LdrrError, Result};
use crate::linalg::{numerical_rank, spd_solve, sym_eigen_desc, PINV_RTOL};

/// Penalty applied to the regression matrix `B` (`p x L`).
///
/// With `||.||` the Frobenius/Euclidean norm and `B_l` the `l`-th column,
/// `B_j.` the `j`-th row:
///
/// | variant | `pen(B)` |
/// |---|---|
/// | `Lasso` | `lambda * sum_l ||B_l||_1` |
/// | `ElasticNet` | `lambda * sum_l [alpha ||B_l||_1 + (1-alpha)/2 ||B_l||^2]` |
/// | `GroupLassoRidge` | `lambda * [alpha sum_j ||B_j.|| + (1-alpha)/2 ||B||^2]` |
/// | `ReducedRank` | `lambda * rank(B)` |
/// | `ReducedRankRidge` | `lambda * [alpha rank(B) + (1-alpha)/2 ||B||^2]` |
/// | `Ridge` | `lambda/2 * ||B||^2` |
/// | `FixedRank` | `ridge/2 * ||B||^2` subject to `rank(B) <= rank` |
/// | `None` | `0` |
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltyConfig {
    Lasso { lambda: f64 },
    ElasticNet { lambda: f64, alpha: f64 },
    GroupLassoRidge { lambda: f64, alpha: f64 },
    ReducedRank { lambda: f64 },
    ReducedRankRidge { lambda: f64, alpha: f64 },
    Ridge { lambda: f64 },
    FixedRank { rank: usize, ridge: f64 },
    None,
}

/// A penalty family without its `lambda`, used for grids and tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltyKind {
    Lasso,
    ElasticNet { alpha: f64 },
    GroupLassoRidge { alpha: f64 },
    ReducedRank,
    ReducedRankRidge { alpha: f64 },
    Ridge,
    None,
}

impl PenaltyKind {
    pub fn with_lambda(self, lambda: f64) -> PenaltyConfig {
        match self {
            PenaltyKind::Lasso => PenaltyConfig::Lasso { lambda },
            PenaltyKind::ElasticNet { alpha } => PenaltyConfig::ElasticNet { lambda, alpha },
            PenaltyKind::GroupLassoRidge { alpha } => PenaltyConfig::GroupLassoRidge { lambda, alpha },
            PenaltyKind::ReducedRank => PenaltyConfig::ReducedRank { lambda },
            PenaltyKind::ReducedRankRidge { alpha } => PenaltyConfig::ReducedRankRidge { lambda, alpha },
            PenaltyKind::Ridge => PenaltyConfig::Ridge { lambda },
            PenaltyKind::None => PenaltyConfig::None,
        }
    }

    /// Whether the family is fitted by coordinate descent (and so benefits
    /// from warm starts along a path).
    pub fn is_iterative(self) -> bool {
        matches!(
            self,
            PenaltyKind::Lasso | PenaltyKind::ElasticNet { .. } | PenaltyKind::GroupLassoRidge { .. }
        )
    }
}

impl PenaltyConfig {
    pub fn kind(&self) -> Option<PenaltyKind> {
        Some(match *self {
            PenaltyConfig::Lasso { .. } => PenaltyKind::Lasso,
            PenaltyConfig::ElasticNet { alpha, .. } => PenaltyKind::ElasticNet { alpha },
            PenaltyConfig::GroupLassoRidge { alpha, .. } => PenaltyKind::GroupLassoRidge { alpha },
            PenaltyConfig::ReducedRank { .. } => PenaltyKind::ReducedRank,
            PenaltyConfig::ReducedRankRidge { alpha, .. } => PenaltyKind::ReducedRankRidge { alpha },
            PenaltyConfig::Ridge { .. } => PenaltyKind::Ridge,
            PenaltyConfig::None => PenaltyKind::None,
            PenaltyConfig::FixedRank { .. } => return None,
        })
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            PenaltyConfig::Lasso { lambda }
            | PenaltyConfig::ElasticNet { lambda, .. }
            | PenaltyConfig::GroupLassoRidge { lambda, .. }
            | PenaltyConfig::ReducedRank { lambda }
            | PenaltyConfig::ReducedRankRidge { lambda, .. }
            | PenaltyConfig::Ridge { lambda } => Some(lambda),
            PenaltyConfig::FixedRank { .. } | PenaltyConfig::None => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_lambda = |l: f64| {
            if l.is_finite() && l >= 0.0 {
                Ok(())
            } else {
                Err(LdrrError::InvalidArgument(format!("lambda must be finite and >= 0, got {l}")))
            }
        };
        let check_alpha = |a: f64| {
            if (0.0..=1.0).contains(&a) {
                Ok(())
            } else {
                Err(LdrrError::InvalidArgument(format!("alpha must lie in [0, 1], got {a}")))
            }
        };
        match *self {
            PenaltyConfig::Lasso { lambda }
            | PenaltyConfig::ReducedRank { lambda }
            | PenaltyConfig::Ridge { lambda } => check_lambda(lambda),
            PenaltyConfig::ElasticNet { lambda, alpha }
            | PenaltyConfig::GroupLassoRidge { lambda, alpha }
            | PenaltyConfig::ReducedRankRidge { lambda, alpha } => {
                check_lambda(lambda)?;
                check_alpha(alpha)
            }
            PenaltyConfig::FixedRank { ridge, .. } => check_lambda(ridge),
            PenaltyConfig::None => Ok(()),
        }
    }

    /// `pen(B)`; rank terms use the numerical rank at `1e-10 * sigma_max`.
    pub fn value(&self, b: &DMatrix<f64>) -> f64 {
        let l1 = || b.iter().map(|v| v.abs()).sum::<f64>();
        let sq = || b.norm_squared();
        let groups = || b.row_iter().map(|r| r.norm()).sum::<f64>();
        let rank = || numerical_rank(b, PINV_RTOL) as f64;
        match *self {
            PenaltyConfig::Lasso { lambda } => lambda * l1(),
            PenaltyConfig::ElasticNet { lambda, alpha } => lambda * (alpha * l1() + 0.5 * (1.0 - alpha) * sq()),
            PenaltyConfig::GroupLassoRidge { lambda, alpha } => {
                lambda * (alpha * groups() + 0.5 * (1.0 - alpha) * sq())
            }
            PenaltyConfig::ReducedRank { lambda } => lambda * rank(),
            PenaltyConfig::ReducedRankRidge { lambda, alpha } => {
                lambda * (alpha * rank() + 0.5 * (1.0 - alpha) * sq())
            }
            PenaltyConfig::Ridge { lambda } => 0.5 * lambda * sq(),
            PenaltyConfig::FixedRank { ridge, .. } => 0.5 * ridge * sq(),
            PenaltyConfig::None => 0.0,
        }
    }

    pub fn is_reduced_rank(&self) -> bool {
        matches!(
            self,
            PenaltyConfig::ReducedRank { .. } | PenaltyConfig::ReducedRankRidge { .. } | PenaltyConfig::FixedRank { .. }
        )
    }
}

/// Coordinate-descent controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop when the largest coordinate update in a full sweep is at most
    /// `tol * max(1, max |B|)`.
    pub tol: f64,
    /// Maximum number of sweeps.
    pub max_iter: usize,
    /// Keep the objective after every sweep in [`RegressionFit::objective_trace`].
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 100_000,
            record_trace: false,
        }
    }
}

/// Output of a penalized regression fit.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub b_hat: DMatrix<f64>,
    pub penalty: PenaltyConfig,
    /// `n^{-1} ||Y - X B_hat||_F^2 + pen(B_hat)`.
    pub objective: f64,
    pub n_iters: usize,
    pub converged: bool,
    /// Rank of `b_hat` for reduced-rank penalties.
    pub selected_rank: Option<usize>,
    pub objective_trace: Vec<f64>,
}

/// `n^{-1} ||Y - X B||_F^2 + pen(B)` evaluated directly from the residual.
pub fn objective(x: &DMatrix<f64>, y: &DMatrix<f64>, b: &DMatrix<f64>, penalty: &PenaltyConfig) -> f64 {
    let n = x.nrows().max(1) as f64;
    (y - x * b).norm_squared() / n + penalty.value(b)
}

/// Sufficient statistics of a least-squares problem: `G = X^T X / n` and
/// `C = X^T Y / n`. Reused across penalties and warm starts.
#[derive(Debug, Clone)]
pub struct RegressionProblem<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DMatrix<f64>,
    gram: DMatrix<f64>,
    xty: DMatrix<f64>,
}

impl<'a> RegressionProblem<'a> {
    pub fn new(x: &'a DMatrix<f64>, y: &'a DMatrix<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(LdrrError::DimensionMismatch {
                expected: format!("Y with {} rows", x.nrows()),
                found: format!("{} rows", y.nrows()),
            });
        }
        if x.nrows() == 0 {
            return Err(LdrrError::InvalidArgument("no samples".into()));
        }
        let n = x.nrows() as f64;
        let gram = x.tr_mul(x) / n;
        let xty = x.tr_mul(y) / n;
        Ok(Self { x, y, gram, xty })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        self.y
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn xty(&self) -> &DMatrix<f64> {
        &self.xty
    }

    /// Fits `penalty`, optionally warm-starting coordinate descent from `warm`.
    pub fn fit(&self, penalty: &PenaltyConfig, warm: Option<&DMatrix<f64>>, opts: &SolverOptions) -> Result<RegressionFit> {
        penalty.validate()?;
        let (p, l) = (self.x.ncols(), self.y.ncols());
        if let Some(w) = warm {
            check_shape("warm start", (p, l), w.shape())?;
        }
        let iterative = |l1: f64, l2: f64| -> RegressionFit {
            let mut b = DMatrix::zeros(p, l);
            let mut n_iters = 0;
            let mut converged = true;
            let mut traces: Vec<Vec<f64>> = Vec::new();
            for k in 0..l {
                let w0 = warm.map(|w| w.column(k).into_owned());
                let out = coordinate::cd_elastic_net(&self.gram, &self.xty.column(k).into_owned(), l1, l2, w0, opts);
                b.set_column(k, &out.coef);
                n_iters = n_iters.max(out.n_iters);
                converged &= out.converged;
                traces.push(out.trace);
            }
            let objective_trace = if opts.record_trace { combine_traces(&traces, &self.y_sq()) } else { Vec::new() };
            RegressionFit {
                objective: objective(self.x, self.y, &b, penalty),
                b_hat: b,
                penalty: *penalty,
                n_iters,
                converged,
                selected_rank: None,
                objective_trace,
            }
        };
        match *penalty {
            PenaltyConfig::Lasso { lambda } => Ok(iterative(lambda, 0.0)),
            PenaltyConfig::ElasticNet { lambda, alpha } => Ok(iterative(lambda * alpha, lambda * (1.0 - alpha))),
            PenaltyConfig::GroupLassoRidge { lambda, alpha } => {
                let out = coordinate::cd_group(&self.gram, &self.xty, lambda * alpha, lambda * (1.0 - alpha), warm.cloned(), opts);
                let y_sq: f64 = self.y_sq().iter().sum();
                let objective_trace = out.trace.iter().map(|v| v + y_sq).collect();
                Ok(RegressionFit {
                    objective: objective(self.x, self.y, &out.coef, penalty),
                    b_hat: out.coef,
                    penalty: *penalty,
                    n_iters: out.n_iters,
                    converged: out.converged,
                    selected_rank: None,
                    objective_trace,
                })
            }
            PenaltyConfig::Ridge { lambda } => self.closed_form(lambda, penalty),
            PenaltyConfig::None => self.closed_form(0.0, penalty),
            PenaltyConfig::ReducedRank { lambda } => reduced_rank::fit_with_problem(self, lambda, 0.0, None),
            PenaltyConfig::ReducedRankRidge { lambda, alpha } => {
                reduced_rank::fit_with_problem(self, lambda * alpha, lambda * (1.0 - alpha), None)
            }
            PenaltyConfig::FixedRank { rank, ridge } => reduced_rank::fit_with_problem(self, 0.0, ridge, Some(rank)),
        }
        .map(|mut fit| {
            fit.penalty = *penalty;
            fit
        })
    }

    /// Per-column `||Y_l||^2 / n`.
    fn y_sq(&self) -> Vec<f64> {
        let n = self.x.nrows() as f64;
        self.y.column_iter().map(|c| c.norm_squared() / n).collect()
    }

    /// `(G + ridge/2 I)^{-1} C`.
    pub(crate) fn ridge_solution(&self, ridge: f64) -> Result<DMatrix<f64>> {
        let p = self.gram.nrows();
        let a = &self.gram + DMatrix::identity(p, p) * (0.5 * ridge);
        if ridge == 0.0 {
            check_design(&self.gram)?;
        }
        spd_solve(&a, &self.xty, "X^T X / n + ridge/2 I").map_err(|_| LdrrError::SingularDesign(0.0))
    }

    fn closed_form(&self, ridge: f64, penalty: &PenaltyConfig) -> Result<RegressionFit> {
        let b = self.ridge_solution(ridge)?;
        Ok(RegressionFit {
            objective: objective(self.x, self.y, &b, penalty),
            b_hat: b,
            penalty: *penalty,
            n_iters: 0,
            converged: true,
            selected_rank: None,
            objective_trace: Vec::new(),
        })
    }
}

/// Columns decouple, so the whole-matrix objective after sweep `s` is the sum
/// of per-column objectives (a column that already stopped keeps its last value).
fn combine_traces(traces: &[Vec<f64>], y_sq: &[f64]) -> Vec<f64> {
    let len = traces.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|s| {
            traces
                .iter()
                .zip(y_sq)
                .map(|(t, ys)| ys + t.get(s).or(t.last()).copied().unwrap_or(0.0))
                .sum()
        })
        .collect()
}

/// Errors with `SingularDesign` when `X^T X / n` has eigenvalue ratio below 1e-12.
pub(crate) fn check_design(gram: &DMatrix<f64>) -> Result<()> {
    if gram.nrows() == 0 {
        return Ok(());
    }
    let (vals, _) = sym_eigen_desc(gram);
    let max = vals[0];
    let min = vals[vals.len() - 1];
    if max <= 0.0 || min <= 1e-12 * max {
        return Err(LdrrError::SingularDesign(if max > 0.0 { min / max } else { 0.0 }));
    }
    Ok(())
}

/// Fits `pen` to `(X, Y)` from a cold start.
pub fn fit_penalized(x: &DMatrix<f64>, y: &DMatrix<f64>, penalty: &PenaltyConfig, opts: &SolverOptions) -> Result<RegressionFit> {
    RegressionProblem::new(x, y)?.fit(penalty, None, opts)
}

#[cfg(test)]
mod tests;
