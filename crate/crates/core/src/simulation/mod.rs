//! Seeded synthetic scenarios and the repeated-experiment runner.

mod experiment;
mod scenarios;

pub use experiment::{
    fit_classifier, run_experiment, select_penalty, tune_and_fit, ExperimentOptions, ExperimentReport, LambdaChoice, Method, MethodSummary, RepRecord,
    TrainedClassifier,
};
pub use scenarios::{
    evaluate, gen_ar1_scaled_cov, gen_class_probs, gen_lowrank_scenario, gen_sparse_scenario, random_mixture_model, random_orthonormal,
    sample_dataset, LowRankScenarioConfig, LowRankVariant, ScenarioConfig, ScenarioDraw, SparseScenarioConfig,
    MAX_SAMPLING_ATTEMPTS,
};
