//! Log-spaced tuning grids anchored at `lambda_max`, the smallest penalty
//! level whose solution is identically zero (rank zero for rank penalties).

use nalgebra::DMatrix;

use super::{PenaltyKind, RegressionProblem};
use crate::error::{LdrrError, Result};
use crate::linalg::PINV_RTOL;

/// Ratio between the last and first grid points.
pub const GRID_SPAN: f64 = 1e-3;

/// Floor on `alpha` when dividing by it, so pure-ridge mixtures still get a
/// finite anchor.
const ALPHA_FLOOR: f64 = 1e-3;

/// `lambda_max` for the given family.
///
/// * lasso: `max_{j,l} |(2/n) X_j^T Y_l|`
/// * group lasso: `max_j ||(2/n) X_j^T Y||_2`
/// * rank: `max_r (loss_0 - loss_r) / r`, with `loss_r` the best rank-`r`
///   least-squares loss
///
/// Mixtures with ridge divide the pure anchor by `max(alpha, 1e-3)`; ridge
/// alone uses the lasso anchor with `alpha = 1e-3`.
pub fn lambda_max(x: &DMatrix<f64>, y: &DMatrix<f64>, kind: PenaltyKind) -> Result<f64> {
    let problem = RegressionProblem::new(x, y)?;
    let grad = problem.xty() * 2.0;
    let lasso = grad.amax();
    let group = grad.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    let a = |alpha: f64| alpha.max(ALPHA_FLOOR);
    Ok(match kind {
        PenaltyKind::Lasso => lasso,
        PenaltyKind::ElasticNet { alpha } => lasso / a(alpha),
        PenaltyKind::GroupLassoRidge { alpha } => group / a(alpha),
        PenaltyKind::Ridge => lasso / ALPHA_FLOOR,
        PenaltyKind::ReducedRank => rank_anchor(x, y),
        PenaltyKind::ReducedRankRidge { alpha } => rank_anchor(x, y) / a(alpha),
        PenaltyKind::None => {
            return Err(LdrrError::InvalidArgument("penalty 'none' has no tuning parameter".into()));
        }
    })
}

/// Smallest rank penalty making rank zero optimal, computed from the
/// projection of `Y` onto the column space of `X` (valid for any design).
fn rank_anchor(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let n = x.nrows() as f64;
    let svd = x.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut proj = DMatrix::zeros(y.nrows(), y.ncols());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > PINV_RTOL * smax {
            let uk = u.column(k);
            proj += &uk * (uk.transpose() * y);
        }
    }
    let mut sv: Vec<f64> = proj.svd(false, false).singular_values.iter().map(|s| s * s / n).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let max_rank = x.ncols().min(y.ncols()).min(sv.len());
    let mut drop = 0.0;
    let mut best = 0.0f64;
    for (r, s2) in sv.iter().take(max_rank).enumerate() {
        drop += s2;
        best = best.max(drop / (r + 1) as f64);
    }
    best
}

/// `n_grid` values log-spaced from `lambda_max` down to `1e-3 * lambda_max`,
/// strictly decreasing.
pub fn lambda_grid(x: &DMatrix<f64>, y: &DMatrix<f64>, kind: PenaltyKind, n_grid: usize) -> Result<Vec<f64>> {
    if n_grid < 2 {
        return Err(LdrrError::InvalidArgument("n_grid must be >= 2".into()));
    }
    let mut top = lambda_max(x, y, kind)?;
    if !(top > 0.0) {
        // X carries no signal about Y; any positive anchor gives the zero fit
        top = 1.0;
    }
    let step = GRID_SPAN.ln() / (n_grid - 1) as f64;
    let mut grid: Vec<f64> = (0..n_grid).map(|k| top * (step * k as f64).exp()).collect();
    grid[0] = top;
    grid[n_grid - 1] = top * GRID_SPAN;
    Ok(grid)
}
