//! Rank-penalized least squares, solved exactly by enumerating ranks.
//!
//! With a ridge term `ridge/2 ||B||_F^2` the loss equals an unpenalized one
//! on the augmented design `[X; sqrt(n ridge / 2) I]`, `[Y; 0]`. For a
//! full-column-rank (augmented) design, the best rank-`r` fit is
//! `B_full V_r V_r^T`, where `B_full` is the (ridge) least-squares solution
//! and `V_r` holds the top `r` right singular vectors of the augmented
//! fitted values.

use nalgebra::DMatrix;

use super::{objective, PenaltyConfig, RegressionFit, RegressionProblem};
use crate::error::{LdrrError, Result};
use crate::linalg::{numerical_rank, PINV_RTOL};

/// Minimizes `n^{-1} ||Y - X B||_F^2 + ridge/2 ||B||_F^2 + lambda rank(B)`
/// over all ranks `0..=min(p, L)`.
///
/// With `ridge = 0` the design must have full column rank.
pub fn fit_reduced_rank(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64, ridge: f64) -> Result<RegressionFit> {
    if !(lambda >= 0.0 && ridge >= 0.0) {
        return Err(LdrrError::InvalidArgument("lambda and ridge must be >= 0".into()));
    }
    let problem = RegressionProblem::new(x, y)?;
    fit_with_problem(&problem, lambda, ridge, None)
}

/// Best fit of rank at most `rank` (clamped to `min(p, L)`).
pub fn fit_reduced_rank_fixed(x: &DMatrix<f64>, y: &DMatrix<f64>, rank: usize, ridge: f64) -> Result<RegressionFit> {
    if !(ridge >= 0.0) {
        return Err(LdrrError::InvalidArgument("ridge must be >= 0".into()));
    }
    let problem = RegressionProblem::new(x, y)?;
    let mut fit = fit_with_problem(&problem, 0.0, ridge, Some(rank))?;
    fit.penalty = PenaltyConfig::FixedRank { rank, ridge };
    Ok(fit)
}

/// The penalty that `fit_reduced_rank(lambda, ridge)` minimizes, expressed as
/// a [`PenaltyConfig`].
pub(crate) fn as_penalty(lambda: f64, ridge: f64) -> PenaltyConfig {
    if ridge == 0.0 {
        PenaltyConfig::ReducedRank { lambda }
    } else {
        let total = lambda + ridge;
        PenaltyConfig::ReducedRankRidge {
            lambda: total,
            alpha: lambda / total,
        }
    }
}

/// Candidate rank-`r` solutions `B_full V_r V_r^T` for `r = 0..=min(p, L)`.
pub(crate) fn rank_candidates(problem: &RegressionProblem<'_>, ridge: f64) -> Result<Vec<DMatrix<f64>>> {
    let x = problem.x();
    let (n, p) = x.shape();
    let l = problem.y().ncols();
    let b_full = problem.ridge_solution(ridge)?;
    let fitted = x * &b_full;
    let aug = if ridge > 0.0 {
        let mut a = DMatrix::zeros(n + p, l);
        a.rows_mut(0, n).copy_from(&fitted);
        a.rows_mut(n, p).copy_from(&(&b_full * (0.5 * n as f64 * ridge).sqrt()));
        a
    } else {
        fitted
    };
    let svd = aug.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let max_rank = p.min(l).min(order.len());
    let mut out = Vec::with_capacity(max_rank + 1);
    let mut proj = DMatrix::<f64>::zeros(l, l);
    out.push(DMatrix::zeros(p, l));
    for &k in order.iter().take(max_rank) {
        let v = vt.row(k).transpose();
        proj += &v * v.transpose();
        out.push(&b_full * &proj);
    }
    Ok(out)
}

/// Relative slack under which two rank objectives count as tied.
const RANK_TIE_RTOL: f64 = 1e-12;

pub(crate) fn fit_with_problem(
    problem: &RegressionProblem<'_>,
    lambda: f64,
    ridge: f64,
    fixed_rank: Option<usize>,
) -> Result<RegressionFit> {
    let candidates = rank_candidates(problem, ridge)?;
    let (x, y) = (problem.x(), problem.y());
    let smooth = if ridge > 0.0 { PenaltyConfig::Ridge { lambda: ridge } } else { PenaltyConfig::None };
    let chosen = match fixed_rank {
        Some(r) => r.min(candidates.len() - 1),
        None => {
            let mut best = 0;
            let mut best_obj = objective(x, y, &candidates[0], &smooth);
            for (r, b) in candidates.iter().enumerate().skip(1) {
                let obj = objective(x, y, b, &smooth) + lambda * r as f64;
                // exact ties (e.g. at the grid anchor) resolve to the lower rank
                if obj < best_obj - RANK_TIE_RTOL * best_obj.abs().max(1.0) {
                    best = r;
                    best_obj = obj;
                }
            }
            best
        }
    };
    let b_hat = candidates[chosen].clone();
    let rank = numerical_rank(&b_hat, PINV_RTOL);
    let penalty = as_penalty(lambda, ridge);
    Ok(RegressionFit {
        objective: objective(x, y, &b_hat, &smooth) + lambda * rank as f64,
        b_hat,
        penalty,
        n_iters: 0,
        converged: true,
        selected_rank: Some(rank),
        objective_trace: Vec::new(),
    })
}
