//! Stratified K-fold cross-validation over penalty candidates.
//!
//! Each fold is fitted independently (folds run in parallel); within a fold
//! the candidates are visited in order and iterative solvers warm-start from
//! the previous candidate of the same family. Results are reduced in fold
//! order, so the output does not depend on scheduling.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{LdrrError, Result};
use crate::ldrr::{FitOptions, LdrrModel, PreparedData};
use crate::linalg::column_means;
use crate::regression::{PenaltyConfig, PenaltyKind};
use crate::rng::{derive_seed, rng_from_seed};

/// Default number of folds.
pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvLoss {
    /// `||Y_val - Y_hat||_F^2 / n_val` with `Y_hat = ybar_train + z B_hat`.
    #[default]
    RegressionMse,
    /// Held-out error rate of the plug-in classifier.
    Misclassification,
}

/// Per-candidate cross-validation summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub candidates: Vec<PenaltyConfig>,
    pub mean_loss: Vec<f64>,
    /// Standard error of the fold losses (`sd / sqrt(K)`).
    pub se_loss: Vec<f64>,
    pub best_index: usize,
    pub best: PenaltyConfig,
}

/// Assigns each sample to a fold, stratified by class.
///
/// Within each class the samples are shuffled and dealt round-robin; the deal
/// continues where the previous class stopped so fold sizes stay balanced.
pub fn stratified_folds(labels: &[usize], n_classes: usize, n_folds: usize, seed: u64) -> Result<Vec<usize>> {
    if n_folds < 2 {
        return Err(LdrrError::InvalidArgument("n_folds must be >= 2".into()));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    if let Some((class, members)) = by_class.iter().enumerate().find(|(_, m)| m.len() < n_folds) {
        return Err(LdrrError::ClassMissingInFold {
            class,
            count: members.len(),
            folds: n_folds,
        });
    }
    let mut fold_of = vec![0; labels.len()];
    let mut next = 0;
    for (c, members) in by_class.iter_mut().enumerate() {
        let mut rng = rng_from_seed(derive_seed(seed, "cv_folds", c as u64));
        members.shuffle(&mut rng);
        for &i in members.iter() {
            fold_of[i] = next % n_folds;
            next += 1;
        }
    }
    Ok(fold_of)
}

/// `true` if `a` is more parsimonious than `b` (larger lambda, or lower rank).
fn more_parsimonious(a: &PenaltyConfig, b: &PenaltyConfig) -> bool {
    match (a, b) {
        (PenaltyConfig::FixedRank { rank: ra, .. }, PenaltyConfig::FixedRank { rank: rb, .. }) => ra < rb,
        _ => a.lambda().unwrap_or(0.0) > b.lambda().unwrap_or(0.0),
    }
}

/// Cross-validates `kind` over `grid`; ties go to the larger lambda.
pub fn cross_validate(
    data: &LabeledDataset,
    kind: PenaltyKind,
    grid: &[f64],
    n_folds: usize,
    seed: u64,
    loss: CvLoss,
    opts: &FitOptions,
) -> Result<CvResult> {
    let candidates: Vec<PenaltyConfig> = grid.iter().map(|&l| kind.with_lambda(l)).collect();
    cross_validate_candidates(data, &candidates, n_folds, seed, loss, opts)
}

/// Cross-validates the rank directly: candidates `rank = 0..=min(p, L)` with
/// a fixed ridge. Ties go to the lower rank.
pub fn cross_validate_rank(
    data: &LabeledDataset,
    ridge: f64,
    n_folds: usize,
    seed: u64,
    loss: CvLoss,
    opts: &FitOptions,
) -> Result<CvResult> {
    let max_rank = data.n_features().min(data.n_classes());
    let candidates: Vec<PenaltyConfig> = (0..=max_rank).map(|rank| PenaltyConfig::FixedRank { rank, ridge }).collect();
    cross_validate_candidates(data, &candidates, n_folds, seed, loss, opts)
}

/// Cross-validates an arbitrary candidate list.
pub fn cross_validate_candidates(
    data: &LabeledDataset,
    candidates: &[PenaltyConfig],
    n_folds: usize,
    seed: u64,
    loss: CvLoss,
    opts: &FitOptions,
) -> Result<CvResult> {
    if candidates.is_empty() {
        return Err(LdrrError::InvalidArgument("no candidates to cross-validate".into()));
    }
    for c in candidates {
        c.validate()?;
    }
    let folds = stratified_folds(data.labels(), data.n_classes(), n_folds, seed)?;
    let fold_losses: Vec<Vec<f64>> = (0..n_folds)
        .into_par_iter()
        .map(|f| {
            let train_idx: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] != f).collect();
            let val_idx: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] == f).collect();
            fold_path(&data.subset(&train_idx), &data.subset(&val_idx), candidates, loss, opts)
        })
        .collect::<Result<_>>()?;

    let k = n_folds as f64;
    let mut mean_loss = Vec::with_capacity(candidates.len());
    let mut se_loss = Vec::with_capacity(candidates.len());
    for c in 0..candidates.len() {
        let vals: Vec<f64> = fold_losses.iter().map(|f| f[c]).collect();
        let mean = vals.iter().sum::<f64>() / k;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        mean_loss.push(mean);
        se_loss.push((var / k).sqrt());
    }
    let mut best_index = 0;
    for c in 1..candidates.len() {
        let (lc, lb) = (mean_loss[c], mean_loss[best_index]);
        if lc < lb || (lc == lb && more_parsimonious(&candidates[c], &candidates[best_index])) {
            best_index = c;
        }
    }
    Ok(CvResult {
        candidates: candidates.to_vec(),
        mean_loss,
        se_loss,
        best_index,
        best: candidates[best_index],
    })
}

fn fold_path(
    train: &LabeledDataset,
    val: &LabeledDataset,
    candidates: &[PenaltyConfig],
    loss: CvLoss,
    opts: &FitOptions,
) -> Result<Vec<f64>> {
    let prepared = PreparedData::new(train, opts.standardize)?;
    let problem = prepared.problem()?;
    let z_val = prepared.transform.apply(val.x())?;
    let y_bar: DVector<f64> = column_means(train.y());

    let mut losses = Vec::with_capacity(candidates.len());
    let mut warm: Option<(PenaltyKind, DMatrix<f64>)> = None;
    for cand in candidates {
        let kind = cand.kind();
        let start = match (&warm, kind) {
            (Some((wk, b)), Some(k)) if *wk == k && k.is_iterative() => Some(b),
            _ => None,
        };
        let fit = problem.fit(cand, start, &opts.solver)?;
        let value = match loss {
            CvLoss::RegressionMse => {
                let mut pred = &z_val * &fit.b_hat;
                for mut row in pred.row_iter_mut() {
                    row += y_bar.transpose();
                }
                (val.y() - pred).norm_squared() / val.n_samples().max(1) as f64
            }
            CvLoss::Misclassification => {
                let model = LdrrModel::assemble(&prepared, &fit)?;
                let pred = model.predict(val.x())?;
                let wrong = pred.iter().zip(val.labels()).filter(|(a, b)| a != b).count();
                wrong as f64 / val.n_samples().max(1) as f64
            }
        };
        losses.push(value);
        warm = kind.map(|k| (k, fit.b_hat));
    }
    Ok(losses)
}
