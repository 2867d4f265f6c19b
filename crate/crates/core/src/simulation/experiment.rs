use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenarios::{evaluate, ScenarioConfig, ScenarioDraw};
use crate::cv::{cross_validate, CvLoss, CvResult, DEFAULT_FOLDS};
use crate::dataset::LabeledDataset;
use crate::error::{LdrrError, Result};
use crate::fisher::LdrrFModel;
use crate::ldrr::{FitOptions, LdrrModel, PreparedData};
use crate::regression::{lambda_grid, PenaltyConfig, PenaltyKind};
use crate::rng::derive_seed;

/// How the penalty level is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LambdaChoice {
    Fixed { lambda: f64 },
    Cv { n_grid: usize, n_folds: usize, loss: CvLoss },
}

impl Default for LambdaChoice {
    fn default() -> Self {
        LambdaChoice::Cv {
            n_grid: 30,
            n_folds: DEFAULT_FOLDS,
            loss: CvLoss::RegressionMse,
        }
    }
}

/// A classifier evaluated in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    /// The Bayes rule with the true parameters.
    BayesOracle,
    Ldrr { kind: PenaltyKind, lambda: LambdaChoice },
    /// `k = None` uses the default number of directions.
    LdrrF { kind: PenaltyKind, lambda: LambdaChoice, k: Option<usize> },
}

fn kind_label(kind: PenaltyKind) -> &'static str {
    match kind {
        PenaltyKind::Lasso => "L1",
        PenaltyKind::ElasticNet { .. } => "L1+L2",
        PenaltyKind::GroupLassoRidge { .. } => "L12+L2",
        PenaltyKind::ReducedRank => "RR",
        PenaltyKind::ReducedRankRidge { .. } => "RR+L2",
        PenaltyKind::Ridge => "L2",
        PenaltyKind::None => "OLS",
    }
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::BayesOracle => "Bayes".to_string(),
            Method::Ldrr { kind, .. } => format!("LDRR({})", kind_label(*kind)),
            Method::LdrrF { kind, .. } => format!("LDRR-F({})", kind_label(*kind)),
        }
    }
}

/// A fitted classifier of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedClassifier {
    Ldrr(LdrrModel),
    LdrrF(LdrrFModel),
}

impl TrainedClassifier {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        match self {
            TrainedClassifier::Ldrr(m) => m.predict(x),
            TrainedClassifier::LdrrF(m) => m.predict(x),
        }
    }

    pub fn penalty(&self) -> PenaltyConfig {
        match self {
            TrainedClassifier::Ldrr(m) => m.penalty,
            TrainedClassifier::LdrrF(m) => m.penalty,
        }
    }
}

/// Chooses the penalty level, by CV over [`lambda_grid`] when requested.
pub fn select_penalty(
    data: &LabeledDataset,
    kind: PenaltyKind,
    lambda: LambdaChoice,
    seed: u64,
    opts: &FitOptions,
) -> Result<(PenaltyConfig, Option<CvResult>)> {
    match (kind, lambda) {
        (PenaltyKind::None, _) => Ok((PenaltyConfig::None, None)),
        (_, LambdaChoice::Fixed { lambda }) => Ok((kind.with_lambda(lambda), None)),
        (_, LambdaChoice::Cv { n_grid, n_folds, loss }) => {
            let prepared = PreparedData::new(data, opts.standardize)?;
            let grid = lambda_grid(prepared.data.x(), prepared.data.y(), kind, n_grid)?;
            let cv = cross_validate(data, kind, &grid, n_folds, seed, loss, opts)?;
            Ok((cv.best, Some(cv)))
        }
    }
}

/// Fits the final classifier on all of `data` with a fixed penalty.
///
/// `fisher = Some(k)` fits the reduced-dimension variant with `k` directions
/// (`None` inside: default count).
pub fn fit_classifier(
    data: &LabeledDataset,
    penalty: &PenaltyConfig,
    fisher: Option<Option<usize>>,
    opts: &FitOptions,
) -> Result<TrainedClassifier> {
    let prepared = PreparedData::new(data, opts.standardize)?;
    let fit = prepared.regress(penalty, None, &opts.solver)?;
    Ok(match fisher {
        None => TrainedClassifier::Ldrr(LdrrModel::assemble(&prepared, &fit)?),
        Some(k) => TrainedClassifier::LdrrF(LdrrFModel::assemble(&prepared, &fit, k)?),
    })
}

/// [`select_penalty`] followed by [`fit_classifier`].
pub fn tune_and_fit(
    data: &LabeledDataset,
    kind: PenaltyKind,
    lambda: LambdaChoice,
    fisher: Option<Option<usize>>,
    seed: u64,
    opts: &FitOptions,
) -> Result<(TrainedClassifier, Option<CvResult>)> {
    let (penalty, cv) = select_penalty(data, kind, lambda, seed, opts)?;
    Ok((fit_classifier(data, &penalty, fisher, opts)?, cv))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub n_reps: usize,
    pub base_seed: u64,
    /// Monte-Carlo sample size for each rep's Bayes-error estimate.
    pub bayes_mc_samples: usize,
    pub fit: FitOptions,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            n_reps: 50,
            base_seed: 0,
            bayes_mc_samples: 20_000,
            fit: FitOptions::default(),
        }
    }
}

/// Outcome of one method on one rep.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    pub error: Option<f64>,
    pub failure: Option<String>,
    /// `sigma_min(H_hat) / sigma_max(H_hat)` for LDRR methods.
    pub h_ratio: Option<f64>,
    pub h_near_singular: bool,
    pub penalty: Option<PenaltyConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub name: String,
    pub method: Method,
    /// Mean test error over successful reps (NaN if none succeeded).
    pub mean_error: f64,
    /// Standard error of the mean; `None` with fewer than two successful reps.
    pub se: Option<f64>,
    /// `mean_error - bayes_error_mc`.
    pub excess_risk: f64,
    pub h_singular_warnings: usize,
    pub n_failed: usize,
    pub reps: Vec<RepRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub scenario: ScenarioConfig,
    pub n_reps: usize,
    pub base_seed: u64,
    pub rep_seeds: Vec<u64>,
    /// Mean over reps of the Monte-Carlo Bayes error.
    pub bayes_error_mc: f64,
    pub bayes_error_se: Option<f64>,
    /// Mean over reps of the separation `max_l mu_l^T Sigma_W^{-1} mu_l`
    /// (centered model).
    pub delta_inf: f64,
    pub methods: Vec<MethodSummary>,
}

impl ExperimentReport {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn h_singular_warnings(&self) -> usize {
        self.methods.iter().map(|m| m.h_singular_warnings).sum()
    }
}

fn mean_and_se(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, Some((var / n as f64).sqrt()))
}

struct RepOutcome {
    bayes_mc: f64,
    delta_inf: f64,
    records: Vec<RepRecord>,
}

/// Penalties already selected within one rep, keyed by how they were chosen.
/// Methods sharing a penalty kind and lambda choice share the CV run.
type PenaltyCache = Vec<((PenaltyKind, LambdaChoice), Result<PenaltyConfig>)>;

fn cached_penalty(
    cache: &mut PenaltyCache,
    data: &LabeledDataset,
    kind: PenaltyKind,
    lambda: LambdaChoice,
    cv_seed: u64,
    opts: &FitOptions,
) -> Result<PenaltyConfig> {
    if let Some((_, hit)) = cache.iter().find(|(key, _)| *key == (kind, lambda)) {
        return hit.clone();
    }
    let chosen = select_penalty(data, kind, lambda, cv_seed, opts).map(|(p, _)| p);
    cache.push(((kind, lambda), chosen.clone()));
    chosen
}

fn run_method(method: &Method, draw: &ScenarioDraw, rep: usize, seed: u64, cache: &mut PenaltyCache, opts: &FitOptions) -> RepRecord {
    let mut record = RepRecord {
        rep,
        seed,
        error: None,
        failure: None,
        h_ratio: None,
        h_near_singular: false,
        penalty: None,
    };
    let cv_seed = derive_seed(seed, "cv", 0);
    let (kind, lambda, fisher) = match *method {
        Method::BayesOracle => {
            match evaluate(|x| Ok(draw.oracle_predictions(x)), &draw.test) {
                Ok(e) => record.error = Some(e),
                Err(e) => record.failure = Some(e.to_string()),
            }
            return record;
        }
        Method::Ldrr { kind, lambda } => (kind, lambda, None),
        Method::LdrrF { kind, lambda, k } => (kind, lambda, Some(k)),
    };
    let outcome = cached_penalty(cache, &draw.train, kind, lambda, cv_seed, opts).and_then(|penalty| {
        record.penalty = Some(penalty);
        let m = fit_classifier(&draw.train, &penalty, fisher, opts)?;
        if let TrainedClassifier::Ldrr(model) = &m {
            record.h_ratio = Some(if model.h_max_singular > 0.0 {
                model.h_min_singular / model.h_max_singular
            } else {
                0.0
            });
            record.h_near_singular = model.h_near_singular();
        }
        evaluate(|x| m.predict(x), &draw.test)
    });
    match outcome {
        Ok(e) => record.error = Some(e),
        Err(e) => record.failure = Some(e.to_string()),
    }
    record
}

/// Runs `methods` on `n_reps` independent scenario draws.
///
/// Rep `r` uses the seed `derive_seed(base_seed, "rep", r)` for everything it
/// draws, so reports do not depend on execution order. A method failing on a
/// rep is recorded in its [`RepRecord`] and does not stop the others. All
/// methods in a rep see the same training/test draw and the same CV folds.
pub fn run_experiment(scenario: &ScenarioConfig, methods: &[Method], opts: &ExperimentOptions) -> Result<ExperimentReport> {
    if opts.n_reps == 0 {
        return Err(LdrrError::InvalidArgument("n_reps must be >= 1".into()));
    }
    if methods.is_empty() {
        return Err(LdrrError::InvalidArgument("no methods to evaluate".into()));
    }
    let rep_seeds: Vec<u64> = (0..opts.n_reps).map(|r| derive_seed(opts.base_seed, "rep", r as u64)).collect();
    let outcomes: Vec<RepOutcome> = rep_seeds
        .par_iter()
        .enumerate()
        .map(|(rep, &seed)| -> Result<RepOutcome> {
            let draw = scenario.with_seed(seed).draw()?;
            let bayes_mc = draw.model.bayes_error_mc(opts.bayes_mc_samples, derive_seed(seed, "bayes_mc", 0))?;
            let delta_inf = draw.model.center().separation_delta();
            let mut cache = PenaltyCache::new();
            let records = methods
                .iter()
                .map(|m| run_method(m, &draw, rep, seed, &mut cache, &opts.fit))
                .collect();
            Ok(RepOutcome {
                bayes_mc,
                delta_inf,
                records,
            })
        })
        .collect::<Result<_>>()?;

    let bayes: Vec<f64> = outcomes.iter().map(|o| o.bayes_mc).collect();
    let (bayes_error_mc, bayes_error_se) = mean_and_se(&bayes);
    let delta_inf = outcomes.iter().map(|o| o.delta_inf).sum::<f64>() / outcomes.len() as f64;
    let summaries = methods
        .iter()
        .enumerate()
        .map(|(i, method)| {
            let reps: Vec<RepRecord> = outcomes.iter().map(|o| o.records[i].clone()).collect();
            let errors: Vec<f64> = reps.iter().filter_map(|r| r.error).collect();
            let (mean_error, se) = mean_and_se(&errors);
            MethodSummary {
                name: method.name(),
                method: *method,
                mean_error,
                se,
                excess_risk: mean_error - bayes_error_mc,
                h_singular_warnings: reps.iter().filter(|r| r.h_near_singular).count(),
                n_failed: reps.iter().filter(|r| r.failure.is_some()).count(),
                reps,
            }
        })
        .collect();
    Ok(ExperimentReport {
        scenario: *scenario,
        n_reps: opts.n_reps,
        base_seed: opts.base_seed,
        rep_seeds,
        bayes_error_mc,
        bayes_error_se,
        delta_inf,
        methods: summaries,
    })
}
