use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::linalg::max_abs_diff;
use crate::rng::{rng_from_seed, Rng};

fn gaussian(n: usize, p: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng))
}

fn one_hot(n: usize, l: usize, rng: &mut Rng) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(n, l);
    for i in 0..n {
        y[(i, rng.random_range(0..l))] = 1.0;
    }
    y
}

fn tight() -> SolverOptions {
    SolverOptions {
        tol: 1e-13,
        max_iter: 100_000,
        record_trace: true,
    }
}

#[test]
fn soft_threshold_examples() {
    assert_eq!(soft_threshold(3.0, 1.0), 2.0);
    assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
    assert_eq!(soft_threshold(-3.0, 0.5), -2.5);
}

/// Brute-force proximal oracle: minimize the 1-d objective
/// `g b^2 - 2 r b + t |b|` by golden-section search.
fn prox_oracle(g: f64, r: f64, t: f64) -> f64 {
    let f = |b: f64| g * b * b - 2.0 * r * b + t * b.abs();
    let (mut lo, mut hi) = (-10.0 - r.abs() / g, 10.0 + r.abs() / g);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let mid = 0.5 * (lo + hi);
    if f(0.0) <= f(mid) { 0.0 } else { mid }
}

#[test]
fn orthonormal_design_closed_form() {
    // columns of a scaled orthonormal frame: X^T X / n = I
    let mut rng = rng_from_seed(5);
    let n = 40;
    let q = gaussian(n, 6, &mut rng).qr().q() * (n as f64).sqrt();
    let y = gaussian(n, 1, &mut rng).column(0).into_owned();
    let lambda = 0.3;
    let fit = fit_elastic_net_column(&q, &y, lambda, 0.0, None, 1e-12, 1000);
    assert!(fit.converged);
    let ols = q.tr_mul(&y) / n as f64;
    for j in 0..6 {
        let threshold = n as f64 * lambda / (2.0 * q.column(j).norm_squared());
        let closed = soft_threshold(ols[j], threshold);
        assert!((fit.coef[j] - closed).abs() < 1e-8, "{j}: {} vs {}", fit.coef[j], closed);
        let brute = prox_oracle(1.0, ols[j], lambda);
        assert!((closed - brute).abs() < 1e-7, "{closed} vs {brute}");
    }
}

#[test]
fn unpenalized_column_is_ols() {
    let mut rng = rng_from_seed(6);
    let x = gaussian(30, 5, &mut rng);
    let y = gaussian(30, 1, &mut rng).column(0).into_owned();
    let fit = fit_elastic_net_column(&x, &y, 0.0, 0.0, None, 1e-14, 100_000);
    let resid = x.tr_mul(&(&y - &x * &fit.coef));
    assert!(resid.amax() < 1e-8, "{}", resid.amax());
}

#[test]
fn lambda_above_max_gives_zero() {
    let mut rng = rng_from_seed(7);
    let x = gaussian(25, 8, &mut rng);
    let y = one_hot(25, 3, &mut rng);
    let top = lambda_max(&x, &y, PenaltyKind::Lasso).unwrap();
    let direct = (x.tr_mul(&y) * (2.0 / 25.0)).amax();
    assert!((top - direct).abs() <= 1e-14 * direct);
    let fit = fit_penalized(&x, &y, &PenaltyConfig::Lasso { lambda: top }, &SolverOptions::default()).unwrap();
    assert!(fit.b_hat.iter().all(|&v| v == 0.0));
    let fit = fit_penalized(&x, &y, &PenaltyConfig::Lasso { lambda: 0.99 * top }, &SolverOptions::default()).unwrap();
    assert!(fit.b_hat.iter().any(|&v| v != 0.0));

    let gtop = lambda_max(&x, &y, PenaltyKind::GroupLassoRidge { alpha: 1.0 }).unwrap();
    let g = fit_group_lasso_ridge(&x, &y, gtop, 1.0, 1e-10, 1000);
    assert!(g.coef.iter().all(|&v| v == 0.0));
}

#[test]
fn kkt_and_monotone_descent_on_random_problems() {
    let mut rng = rng_from_seed(8);
    for trial in 0..10 {
        let x = gaussian(40, 10, &mut rng);
        let y = one_hot(40, 3, &mut rng);
        let top = lambda_max(&x, &y, PenaltyKind::Lasso).unwrap();
        let lambda = top * rng.random_range(0.01..0.8);
        let alpha = rng.random_range(0.0..1.0);
        for pen in [
            PenaltyConfig::Lasso { lambda },
            PenaltyConfig::ElasticNet { lambda, alpha },
        ] {
            let fit = fit_penalized(&x, &y, &pen, &tight()).unwrap();
            let (l1, l2) = match pen {
                PenaltyConfig::ElasticNet { lambda, alpha } => (lambda * alpha, lambda * (1.0 - alpha)),
                _ => (lambda, 0.0),
            };
            for k in 0..3 {
                let r = kkt_residual_elastic_net(&x, &y.column(k).into_owned(), &fit.b_hat.column(k).into_owned(), l1, l2);
                assert!(r <= 1e-9, "trial {trial}: kkt {r}");
            }
            for w in fit.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "objective increased: {w:?}");
            }
            let zero = objective(&x, &y, &DMatrix::zeros(10, 3), &pen);
            assert!(fit.objective <= zero);
            let recomputed = objective(&x, &y, &fit.b_hat, &pen);
            assert!((fit.objective - recomputed).abs() <= 1e-9 * recomputed.abs());
            assert!(fit.converged);
        }
        let gfit = fit_penalized(&x, &y, &PenaltyConfig::GroupLassoRidge { lambda, alpha }, &tight()).unwrap();
        let r = kkt_residual_group(&x, &y, &gfit.b_hat, lambda * alpha, lambda * (1.0 - alpha));
        assert!(r <= 1e-9, "group kkt {r}");
        for w in gfit.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
    }
}

#[test]
fn warm_start_does_not_increase_objective() {
    let mut rng = rng_from_seed(9);
    let x = gaussian(50, 12, &mut rng);
    let y = one_hot(50, 4, &mut rng);
    let problem = RegressionProblem::new(&x, &y).unwrap();
    let pen = PenaltyConfig::Lasso { lambda: 0.05 };
    let warm = DMatrix::from_fn(12, 4, |_, _| rng.random_range(-0.5..0.5));
    let fit = problem.fit(&pen, Some(&warm), &SolverOptions::default()).unwrap();
    assert!(fit.objective <= objective(&x, &y, &warm, &pen));
    let cold = problem.fit(&pen, None, &tight()).unwrap();
    assert!(max_abs_diff(&fit.b_hat, &cold.b_hat) < 1e-5);
}

#[test]
fn elastic_net_endpoints() {
    let mut rng = rng_from_seed(10);
    let x = gaussian(30, 6, &mut rng);
    let y = one_hot(30, 3, &mut rng);
    let lambda = 0.07;
    let en1 = fit_penalized(&x, &y, &PenaltyConfig::ElasticNet { lambda, alpha: 1.0 }, &tight()).unwrap();
    let lasso = fit_penalized(&x, &y, &PenaltyConfig::Lasso { lambda }, &tight()).unwrap();
    assert!(max_abs_diff(&en1.b_hat, &lasso.b_hat) < 1e-8);
    let en0 = fit_penalized(&x, &y, &PenaltyConfig::ElasticNet { lambda, alpha: 0.0 }, &tight()).unwrap();
    let ridge = fit_penalized(&x, &y, &PenaltyConfig::Ridge { lambda }, &tight()).unwrap();
    assert!(max_abs_diff(&en0.b_hat, &ridge.b_hat) < 1e-8);
}

#[test]
fn group_lasso_special_cases() {
    let mut rng = rng_from_seed(11);
    let x = gaussian(35, 7, &mut rng);
    let y1 = one_hot(35, 2, &mut rng).columns(0, 1).into_owned();
    let g = fit_group_lasso_ridge(&x, &y1, 0.1, 1.0, 1e-13, 100_000);
    let c = fit_elastic_net_column(&x, &y1.column(0).into_owned(), 0.1, 0.0, None, 1e-13, 100_000);
    assert!(max_abs_diff(&g.coef, &DMatrix::from_column_slice(7, 1, c.coef.as_slice())) < 1e-8);

    let y = one_hot(35, 3, &mut rng);
    let lambda = 0.4;
    let g = fit_group_lasso_ridge(&x, &y, lambda, 0.0, 1e-13, 100_000);
    let n = 35.0;
    let lhs = (x.tr_mul(&x) / n + DMatrix::identity(7, 7) * (lambda / 2.0)) * &g.coef;
    let rhs = x.tr_mul(&y) / n;
    assert!(max_abs_diff(&lhs, &rhs) < 1e-8);
}

#[test]
fn constant_feature_gets_zero_coefficient() {
    let mut rng = rng_from_seed(12);
    let mut x = gaussian(30, 4, &mut rng);
    x.column_mut(2).fill(0.0);
    let y = one_hot(30, 3, &mut rng);
    for pen in [
        PenaltyConfig::Lasso { lambda: 0.01 },
        PenaltyConfig::GroupLassoRidge { lambda: 0.01, alpha: 0.5 },
    ] {
        let fit = fit_penalized(&x, &y, &pen, &SolverOptions::default()).unwrap();
        assert!(fit.b_hat.row(2).iter().all(|&v| v == 0.0));
    }
}

#[test]
fn not_converged_returns_iterate() {
    let mut rng = rng_from_seed(13);
    let x = gaussian(30, 10, &mut rng);
    let y = gaussian(30, 1, &mut rng).column(0).into_owned();
    let fit = fit_elastic_net_column(&x, &y, 1e-4, 0.0, None, 1e-15, 1);
    assert!(!fit.converged);
    assert_eq!(fit.n_iters, 1);
    assert!(fit.coef.iter().any(|&v| v != 0.0));
}

#[test]
fn solvers_are_deterministic() {
    let mut rng = rng_from_seed(14);
    let x = gaussian(40, 9, &mut rng);
    let y = one_hot(40, 3, &mut rng);
    for pen in [
        PenaltyConfig::ElasticNet { lambda: 0.02, alpha: 0.7 },
        PenaltyConfig::GroupLassoRidge { lambda: 0.02, alpha: 0.7 },
        PenaltyConfig::ReducedRankRidge { lambda: 0.02, alpha: 0.5 },
    ] {
        let a = fit_penalized(&x, &y, &pen, &SolverOptions::default()).unwrap();
        let b = fit_penalized(&x, &y, &pen, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}

/// Independent rank-constrained least squares via the eigenvectors of
/// `Y^T X (X^T X)^{-1} X^T Y` (no SVD of fitted values).
fn rank_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let xtx_inv = (x.transpose() * x).try_inverse().unwrap();
    let b_ols = &xtx_inv * x.transpose() * y;
    let m = y.transpose() * x * &b_ols;
    let eig = nalgebra::SymmetricEigen::new((&m + m.transpose()) * 0.5);
    let mut idx: Vec<usize> = (0..m.nrows()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut proj = DMatrix::zeros(m.nrows(), m.nrows());
    for &k in idx.iter().take(r) {
        let v = eig.eigenvectors.column(k);
        proj += v * v.transpose();
    }
    b_ols * proj
}

#[test]
fn reduced_rank_matches_exhaustive_oracle() {
    let mut rng = rng_from_seed(15);
    for _ in 0..5 {
        let x = gaussian(60, 8, &mut rng);
        let y = one_hot(60, 6, &mut rng);
        let grid = lambda_grid(&x, &y, PenaltyKind::ReducedRank, 10).unwrap();
        for &lambda in &grid {
            let fit = fit_reduced_rank(&x, &y, lambda, 0.0).unwrap();
            let (best_r, best_obj) = (0..=6)
                .map(|r| {
                    let b = rank_oracle(&x, &y, r);
                    (r, (&y - &x * &b).norm_squared() / 60.0 + lambda * r as f64)
                })
                .fold((0, f64::INFINITY), |acc, (r, o)| {
                    if acc.1.is_infinite() || o < acc.1 - 1e-12 * acc.1.abs().max(1.0) { (r, o) } else { acc }
                });
            assert!((fit.objective - best_obj).abs() <= 1e-9, "{} vs {best_obj}", fit.objective);
            assert_eq!(fit.selected_rank, Some(best_r));
        }
    }
}

#[test]
fn reduced_rank_edge_cases() {
    let mut rng = rng_from_seed(16);
    let x = gaussian(50, 6, &mut rng);
    let y = one_hot(50, 4, &mut rng);
    let full = fit_reduced_rank(&x, &y, 0.0, 0.0).unwrap();
    let ols = fit_penalized(&x, &y, &PenaltyConfig::None, &SolverOptions::default()).unwrap();
    assert!(max_abs_diff(&full.b_hat, &ols.b_hat) < 1e-10);
    assert_eq!(full.selected_rank, Some(4));

    let big = y.norm_squared() / 50.0 * 1.01;
    let zero = fit_reduced_rank(&x, &y, big, 0.0).unwrap();
    assert_eq!(zero.selected_rank, Some(0));
    assert!(zero.b_hat.iter().all(|&v| v == 0.0));

    // lambda_max is the exact switching point to rank zero
    let top = lambda_max(&x, &y, PenaltyKind::ReducedRank).unwrap();
    assert_eq!(fit_reduced_rank(&x, &y, top * 1.0001, 0.0).unwrap().selected_rank, Some(0));
    assert!(fit_reduced_rank(&x, &y, top * 0.999, 0.0).unwrap().selected_rank.unwrap() > 0);

    let singular = DMatrix::from_fn(50, 3, |i, j| if j == 2 { x[(i, 0)] } else { x[(i, j)] });
    assert!(matches!(fit_reduced_rank(&singular, &y, 0.1, 0.0), Err(LdrrError::SingularDesign(_))));
    assert!(fit_reduced_rank(&singular, &y, 0.1, 0.5).is_ok());
}

#[test]
fn reduced_rank_ridge_beats_every_truncation() {
    let mut rng = rng_from_seed(17);
    let x = gaussian(40, 5, &mut rng);
    let y = one_hot(40, 5, &mut rng);
    let (lambda, ridge) = (0.01, 0.3);
    let fit = fit_reduced_rank(&x, &y, lambda, ridge).unwrap();
    let pen = PenaltyConfig::ReducedRankRidge { lambda: lambda + ridge, alpha: lambda / (lambda + ridge) };
    assert!((fit.objective - objective(&x, &y, &fit.b_hat, &pen)).abs() < 1e-12);
    // random rank-r perturbations of the chosen solution never do better
    let r = fit.selected_rank.unwrap();
    for _ in 0..50 {
        let u = gaussian(5, r.max(1), &mut rng);
        let v = gaussian(r.max(1), 5, &mut rng);
        let cand = &fit.b_hat * 0.9 + u * v * 0.01;
        if numerical_rank(&cand, PINV_RTOL) <= r {
            assert!(objective(&x, &y, &cand, &pen) >= fit.objective - 1e-12);
        }
    }
    let fixed = fit_reduced_rank_fixed(&x, &y, 2, ridge).unwrap();
    assert_eq!(fixed.selected_rank, Some(2));
}

#[test]
fn grid_shape() {
    let mut rng = rng_from_seed(18);
    let x = gaussian(30, 6, &mut rng);
    let y = one_hot(30, 3, &mut rng);
    let g = lambda_grid(&x, &y, PenaltyKind::Lasso, 2).unwrap();
    let top = lambda_max(&x, &y, PenaltyKind::Lasso).unwrap();
    assert_eq!(g, vec![top, top * 1e-3]);
    let g = lambda_grid(&x, &y, PenaltyKind::ElasticNet { alpha: 0.5 }, 25).unwrap();
    assert_eq!(g.len(), 25);
    assert!(g.windows(2).all(|w| w[1] < w[0]));
    assert!(lambda_grid(&x, &y, PenaltyKind::Lasso, 1).is_err());
    assert!(lambda_grid(&x, &y, PenaltyKind::None, 5).is_err());
}

#[test]
fn invalid_penalties_rejected() {
    let x = DMatrix::from_element(3, 1, 1.0);
    let y = DMatrix::from_element(3, 1, 1.0);
    for pen in [
        PenaltyConfig::Lasso { lambda: -1.0 },
        PenaltyConfig::ElasticNet { lambda: 1.0, alpha: 1.5 },
        PenaltyConfig::Ridge { lambda: f64::NAN },
    ] {
        assert!(matches!(fit_penalized(&x, &y, &pen, &SolverOptions::default()), Err(LdrrError::InvalidArgument(_))));
    }
    let _ = DVector::<f64>::zeros(0);
}
