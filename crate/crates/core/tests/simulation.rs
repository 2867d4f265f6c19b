use ldrr::linalg::{max_abs_diff, numerical_rank, sym_eigen_desc};
use ldrr::simulation::*;
use ldrr::{LdrrError, PenaltyKind};
use nalgebra::DMatrix;
use statrs::distribution::{Binomial, DiscreteCDF};

#[test]
fn class_probs() {
    let p = gen_class_probs(4, 0.0, 1).unwrap();
    assert!(p.iter().all(|&v| v == 0.25));
    let p = gen_class_probs(6, 1.0, 2).unwrap();
    assert!((p.sum() - 1.0).abs() < 1e-15 && p.iter().all(|&v| v > 0.0));
    assert_eq!(p, gen_class_probs(6, 1.0, 2).unwrap());
    // large alpha concentrates on one class without underflow
    let p = gen_class_probs(5, 500.0, 3).unwrap();
    assert!(p.max() > 0.99 && (p.sum() - 1.0).abs() < 1e-15);
    assert!(gen_class_probs(3, -1.0, 0).is_err());
}

#[test]
fn ar1_covariance() {
    let w = gen_ar1_scaled_cov(30, 0.6, 1.0, 3.0, 5).unwrap();
    let (vals, _) = sym_eigen_desc(&w);
    assert!(vals.min() > 0.0);
    for i in 0..30 {
        assert!((1.0..3.0).contains(&w[(i, i)]));
        for j in 0..30 {
            let corr = w[(i, j)] / (w[(i, i)] * w[(j, j)]).sqrt();
            assert!((corr - 0.6f64.powi(i.abs_diff(j) as i32)).abs() < 1e-12);
        }
    }
    assert!(gen_ar1_scaled_cov(5, 1.0, 1.0, 2.0, 0).is_err());
}

#[test]
fn sparse_scenario_structure() {
    let cfg = SparseScenarioConfig { n: 200, p: 40, n_classes: 4, sigma: 0.5, alpha: 1.0, n_test: 50, seed: 11, ..Default::default() };
    let d = gen_sparse_scenario(&cfg).unwrap();
    let m = d.model.means();
    for k in 0..4 {
        for j in 0..40 {
            assert_eq!(m[(j, k)] != 0.0, (5 * k..5 * k + 5).contains(&j), "({j},{k})");
        }
    }
    let w = gen_ar1_scaled_cov(40, cfg.rho, 1.0, 3.0, ldrr::rng::derive_seed(11, "covariance", 0)).unwrap();
    assert!(max_abs_diff(d.model.sigma_w(), &(w * 0.25)) < 1e-14);
    assert!(ldrr::linalg::column_means(d.train.x()).amax() < 1e-12);
    assert_eq!((d.train.n_samples(), d.test.n_samples()), (200, 50));

    // common random numbers: only the training draw depends on n
    let d2 = gen_sparse_scenario(&SparseScenarioConfig { n: 400, ..cfg }).unwrap();
    assert_eq!(d.model.means(), d2.model.means());
    assert_eq!(d.model.sigma_w(), d2.model.sigma_w());
    assert_eq!(d.model.pi(), d2.model.pi());
    let raw = |d: &ScenarioDraw| {
        let mut x = d.test.x().clone();
        for mut r in x.row_iter_mut() {
            r += d.train_mean.transpose();
        }
        x
    };
    assert!(max_abs_diff(&raw(&d), &raw(&d2)) < 1e-12);

    // vanishing noise separates the classes
    let tiny = gen_sparse_scenario(&SparseScenarioConfig { sigma: 1e-3, ..cfg }).unwrap();
    assert!(tiny.model.bayes_error_mc(5000, 1).unwrap() < 1e-3);
    assert!(gen_sparse_scenario(&SparseScenarioConfig { p: 10, ..cfg }).is_err());
}

#[test]
fn lowrank_scenarios() {
    let cfg = LowRankScenarioConfig { n: 300, p: 30, n_classes: 6, rank: 2, n_test: 100, seed: 3, ..LowRankScenarioConfig::model1() };
    let d = gen_lowrank_scenario(&cfg).unwrap();
    assert_eq!(numerical_rank(d.model.means(), 1e-10), 2);
    assert!(d.model.pi().iter().all(|&v| (v - 1.0 / 6.0).abs() < 1e-15));
    assert!((d.model.sigma_w()[(0, 3)] - 0.216).abs() < 1e-15);

    let mut rng = ldrr::rng::rng_from_seed(1);
    let a = random_orthonormal(20, 4, &mut rng);
    assert!(max_abs_diff(&a.tr_mul(&a), &DMatrix::identity(4, 4)) < 1e-12);

    let m2 = LowRankScenarioConfig { n: 300, p: 30, n_classes: 4, rank: 2, n_test: 100, seed: 4, ..LowRankScenarioConfig::model2() };
    let d = gen_lowrank_scenario(&m2).unwrap();
    let (vals, _) = sym_eigen_desc(d.model.sigma_w());
    assert!(vals.min() > 0.0);
    // no signal: Bayes rule is the prior-only rule
    let flat = gen_lowrank_scenario(&LowRankScenarioConfig { eta: 0.0, ..m2 }).unwrap();
    assert_eq!(flat.model.means().amax(), 0.0);
    let err = flat.model.bayes_error_mc(20_000, 2).unwrap();
    assert!((err - 0.75).abs() < 0.02, "{err}");
}

#[test]
fn sampling_frequencies() {
    let pi = gen_class_probs(3, 1.0, 8).unwrap();
    let model = ldrr::MixtureModel::new(DMatrix::zeros(2, 3), DMatrix::identity(2, 2), pi.clone()).unwrap();
    let n = 5000;
    let d = sample_dataset(&model, n, 9).unwrap();
    for (k, &c) in d.class_counts().iter().enumerate() {
        let b = Binomial::new(pi[k], n as u64).unwrap();
        // two-sided 1e-4 binomial band
        let lo = (0..=n as u64).find(|&v| b.cdf(v) >= 5e-5).unwrap();
        let hi = (0..=n as u64).find(|&v| b.cdf(v) >= 1.0 - 5e-5).unwrap();
        assert!((lo..=hi).contains(&(c as u64)), "class {k}: {c} not in [{lo}, {hi}]");
    }
    let mean = ldrr::linalg::column_means(d.x());
    assert!(mean.amax() < 4.0 / (n as f64).sqrt());
}

#[test]
fn evaluate_counts_errors() {
    let test = ldrr::LabeledDataset::from_labels(DMatrix::zeros(4, 1), vec![0, 1, 1, 0], 2).unwrap();
    assert_eq!(evaluate(|_| Ok(vec![0, 1, 0, 0]), &test).unwrap(), 0.25);
    assert!(evaluate(|_| Ok(vec![0]), &test).is_err());
}

fn small_sparse(seed: u64) -> ScenarioConfig {
    ScenarioConfig::Sparse(SparseScenarioConfig { n: 80, p: 20, n_classes: 3, n_test: 400, seed, ..Default::default() })
}

#[test]
fn bayes_oracle_has_no_excess_risk() {
    let opts = ExperimentOptions { n_reps: 8, base_seed: 5, bayes_mc_samples: 20_000, ..Default::default() };
    let r = run_experiment(&small_sparse(0), &[Method::BayesOracle], &opts).unwrap();
    let m = &r.methods[0];
    let se = m.se.unwrap().hypot(r.bayes_error_se.unwrap());
    assert!(m.excess_risk.abs() <= 3.0 * se + 1e-3, "{} vs {se}", m.excess_risk);
    assert_eq!(r.rep_seeds.len(), 8);
}

#[test]
fn experiment_bookkeeping() {
    let fixed = LambdaChoice::Fixed { lambda: 0.05 };
    let methods = [
        Method::BayesOracle,
        Method::Ldrr { kind: PenaltyKind::Lasso, lambda: fixed },
        Method::LdrrF { kind: PenaltyKind::Lasso, lambda: LambdaChoice::Cv { n_grid: 5, n_folds: 3, loss: Default::default() }, k: None },
    ];
    let opts = ExperimentOptions { n_reps: 1, base_seed: 9, bayes_mc_samples: 2000, ..Default::default() };
    let r = run_experiment(&small_sparse(0), &methods, &opts).unwrap();
    assert!(r.methods.iter().all(|m| m.se.is_none() && m.n_failed == 0));
    assert_eq!(r.method("LDRR(L1)").unwrap().reps[0].penalty, Some(ldrr::PenaltyConfig::Lasso { lambda: 0.05 }));

    // method order does not change any method's result
    let opts = ExperimentOptions { n_reps: 3, ..opts };
    let a = run_experiment(&small_sparse(0), &methods, &opts).unwrap();
    let reversed: Vec<Method> = methods.iter().rev().copied().collect();
    let b = run_experiment(&small_sparse(0), &reversed, &opts).unwrap();
    for m in &a.methods {
        assert_eq!(Some(m), b.method(&m.name));
    }
    assert_eq!(a.bayes_error_mc, b.bayes_error_mc);

    assert!(matches!(run_experiment(&small_sparse(0), &[], &opts), Err(LdrrError::InvalidArgument(_))));
    assert!(run_experiment(&small_sparse(0), &methods, &ExperimentOptions { n_reps: 0, ..opts }).is_err());
}

#[test]
fn failures_are_recorded_per_rep() {
    // 2 features cannot support K = 3 directions
    let scenario = ScenarioConfig::Sparse(SparseScenarioConfig { n: 60, p: 10, n_classes: 2, n_test: 50, seed: 0, ..Default::default() });
    let methods = [
        Method::BayesOracle,
        Method::LdrrF { kind: PenaltyKind::Ridge, lambda: LambdaChoice::Fixed { lambda: 0.1 }, k: Some(3) },
    ];
    let opts = ExperimentOptions { n_reps: 2, bayes_mc_samples: 1000, ..Default::default() };
    let r = run_experiment(&scenario, &methods, &opts).unwrap();
    assert_eq!(r.methods[1].n_failed, 2);
    assert!(r.methods[1].mean_error.is_nan());
    assert_eq!(r.methods[0].n_failed, 0);
}
