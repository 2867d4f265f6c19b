use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{LdrrError, Result};
use crate::linalg::column_means;
use crate::mixture::MixtureModel;
use crate::rng::{derive_seed, rng_from_seed, Rng};

/// Training draws missing a class are repeated at most this many times.
pub const MAX_SAMPLING_ATTEMPTS: usize = 100;

/// Width of each class's block of nonzero mean coordinates.
const BLOCK: usize = 5;

/// Sparse mean-shift scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseScenarioConfig {
    pub n: usize,
    pub p: usize,
    pub n_classes: usize,
    pub rho: f64,
    pub sigma: f64,
    /// Class-imbalance exponent; `0` gives balanced classes.
    pub alpha: f64,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SparseScenarioConfig {
    fn default() -> Self {
        Self {
            n: 300,
            p: 500,
            n_classes: 5,
            rho: 0.6,
            sigma: 1.0,
            alpha: 0.0,
            n_test: 500,
            seed: 0,
        }
    }
}

impl SparseScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LdrrError::InvalidArgument(m));
        if self.n == 0 || self.n_classes == 0 {
            return bad("n and L must be positive".into());
        }
        if BLOCK * self.n_classes > self.p {
            return bad(format!("need p >= 5 L, got p = {} and L = {}", self.p, self.n_classes));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if !(self.sigma > 0.0) || !(self.alpha >= 0.0) {
            return bad("sigma must be > 0 and alpha >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowRankVariant {
    /// `[Sigma_W]_ij = rho^|i-j|`, `M = eta A alpha`.
    Model1,
    /// `Sigma_W = eta^2 A Sigma_z A^T + Cov(W)` with `Cov(W)` AR(1)-scaled
    /// (correlation `rho`, diagonal from Uniform(0, 1)).
    Model2,
}

/// Low-rank mean scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowRankScenarioConfig {
    pub variant: LowRankVariant,
    pub n: usize,
    pub p: usize,
    pub n_classes: usize,
    /// Rank of the mean matrix.
    pub rank: usize,
    pub rho: f64,
    pub eta: f64,
    pub n_test: usize,
    pub seed: u64,
}

impl LowRankScenarioConfig {
    pub fn model1() -> Self {
        Self {
            variant: LowRankVariant::Model1,
            n: 1000,
            p: 100,
            n_classes: 10,
            rank: 3,
            rho: 0.6,
            eta: 1.0,
            n_test: 500,
            seed: 0,
        }
    }

    pub fn model2() -> Self {
        Self {
            variant: LowRankVariant::Model2,
            rho: 0.2,
            eta: 2.0,
            ..Self::model1()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LdrrError::InvalidArgument(m));
        if self.n == 0 || self.n_classes == 0 || self.rank == 0 {
            return bad("n, L and r must be positive".into());
        }
        if self.rank > self.p {
            return bad(format!("rank {} exceeds p = {}", self.rank, self.p));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if !(self.eta >= 0.0) {
            return bad("eta must be >= 0".into());
        }
        Ok(())
    }
}

/// Either scenario family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ScenarioConfig {
    Sparse(SparseScenarioConfig),
    LowRank(LowRankScenarioConfig),
}

impl ScenarioConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioConfig::Sparse(_) => "sparse",
            ScenarioConfig::LowRank(c) => match c.variant {
                LowRankVariant::Model1 => "lowrank1",
                LowRankVariant::Model2 => "lowrank2",
            },
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        match *self {
            ScenarioConfig::Sparse(c) => ScenarioConfig::Sparse(SparseScenarioConfig { seed, ..c }),
            ScenarioConfig::LowRank(c) => ScenarioConfig::LowRank(LowRankScenarioConfig { seed, ..c }),
        }
    }

    pub fn draw(&self) -> Result<ScenarioDraw> {
        match self {
            ScenarioConfig::Sparse(c) => gen_sparse_scenario(c),
            ScenarioConfig::LowRank(c) => gen_lowrank_scenario(c),
        }
    }
}

/// A population model with training and test sets.
///
/// Features of both sets are centered by the training mean; `model` keeps
/// the raw (uncentered) parameters.
#[derive(Debug, Clone)]
pub struct ScenarioDraw {
    pub model: MixtureModel,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub train_mean: DVector<f64>,
}

impl ScenarioDraw {
    /// The population model expressed in the centered feature coordinates.
    pub fn centered_coordinates_model(&self) -> MixtureModel {
        self.model.shifted(&(-&self.train_mean))
    }

    /// Bayes-rule labels for the (centered) test features.
    pub fn oracle_predictions(&self, x: &DMatrix<f64>) -> Vec<usize> {
        self.centered_coordinates_model().linear_rule().classify_rows(x)
    }
}

fn uniform_open(rng: &mut Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// `pi_l = nu_l^alpha / sum_i nu_i^alpha` with `nu_i ~ Uniform(0, 1)`.
///
/// Computed in log space so large `alpha` does not underflow; `alpha = 0`
/// returns exactly `1/L`.
pub fn gen_class_probs(n_classes: usize, alpha: f64, seed: u64) -> Result<DVector<f64>> {
    if n_classes == 0 || !(alpha >= 0.0) {
        return Err(LdrrError::InvalidArgument("need L >= 1 and alpha >= 0".into()));
    }
    if alpha == 0.0 {
        return Ok(DVector::from_element(n_classes, 1.0 / n_classes as f64));
    }
    let mut rng = rng_from_seed(seed);
    let logs: Vec<f64> = (0..n_classes).map(|_| alpha * uniform_open(&mut rng).ln()).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|v| (v - top).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(DVector::from_iterator(n_classes, w.iter().map(|v| v / total)))
}

/// `W_ij = sqrt(W_ii W_jj) rho^|i-j|` with `W_ii ~ Uniform(diag_low, diag_high)`
/// (open at zero when `diag_low = 0`).
pub fn gen_ar1_scaled_cov(p: usize, rho: f64, diag_low: f64, diag_high: f64, seed: u64) -> Result<DMatrix<f64>> {
    if !(0.0..1.0).contains(&rho) || !(diag_low >= 0.0) || !(diag_high >= diag_low) || !(diag_high > 0.0) {
        return Err(LdrrError::InvalidArgument(format!(
            "need 0 <= rho < 1 and 0 <= low <= high, high > 0 (rho = {rho}, low = {diag_low}, high = {diag_high})"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let diag: Vec<f64> = (0..p)
        .map(|_| {
            if diag_low == diag_high {
                diag_low
            } else {
                loop {
                    let d = diag_low + (diag_high - diag_low) * rng.random::<f64>();
                    if d > 0.0 {
                        break d;
                    }
                }
            }
        })
        .collect();
    let sd: Vec<f64> = diag.iter().map(|d| d.sqrt()).collect();
    Ok(DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            diag[i]
        } else {
            sd[i] * sd[j] * rho.powi(i.abs_diff(j) as i32)
        }
    }))
}

/// `n` i.i.d. draws: labels from `Categorical(pi)`, features `mu_l + L z`.
pub fn sample_dataset(model: &MixtureModel, n: usize, seed: u64) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(LdrrError::InvalidArgument("n must be >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let (x, labels) = model.sample(n, &mut rng);
    LabeledDataset::from_labels(x, labels, model.n_classes())
}

/// Uniformly random `p x r` matrix with orthonormal columns: QR of a
/// Gaussian matrix, with columns signed so that `diag(R) > 0`.
pub fn random_orthonormal(p: usize, r: usize, rng: &mut Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, r, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let rmat = qr.r();
    for k in 0..r {
        if rmat[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// Draws training and test sets from `model` and centers both by the
/// training mean. The training draw is repeated until every class appears.
fn draw_sets(model: MixtureModel, n: usize, n_test: usize, seed: u64) -> Result<ScenarioDraw> {
    let mut train = None;
    for attempt in 0..MAX_SAMPLING_ATTEMPTS {
        let d = sample_dataset(&model, n, derive_seed(seed, "train", attempt as u64))?;
        if d.require_all_classes().is_ok() {
            train = Some(d);
            break;
        }
    }
    let train = train.ok_or(LdrrError::SamplingFailed(MAX_SAMPLING_ATTEMPTS))?;
    let test = if n_test > 0 {
        sample_dataset(&model, n_test, derive_seed(seed, "test", 0))?
    } else {
        LabeledDataset::from_labels(DMatrix::zeros(0, model.n_features()), Vec::new(), model.n_classes())?
    };
    let train_mean = column_means(train.x());
    let center = |x: &DMatrix<f64>| {
        let mut out = x.clone();
        for mut row in out.row_iter_mut() {
            row -= train_mean.transpose();
        }
        out
    };
    let train = train.with_features(center(train.x()))?;
    let test = test.with_features(center(test.x()))?;
    Ok(ScenarioDraw {
        model,
        train,
        test,
        train_mean,
    })
}

/// Sparse mean-shift scenario: class `l` (0-based) has nonzero mean entries
/// only at indices `5l..5l+5`, drawn from `N(0, 2^2)`;
/// `Sigma_W = sigma^2 W` with `W` AR(1)-scaled, diagonal from Uniform(1, 3).
pub fn gen_sparse_scenario(cfg: &SparseScenarioConfig) -> Result<ScenarioDraw> {
    cfg.validate()?;
    let (p, l) = (cfg.p, cfg.n_classes);
    let pi = gen_class_probs(l, cfg.alpha, derive_seed(cfg.seed, "class_probs", 0))?;
    let w = gen_ar1_scaled_cov(p, cfg.rho, 1.0, 3.0, derive_seed(cfg.seed, "covariance", 0))?;
    let sigma_w = w * (cfg.sigma * cfg.sigma);
    let mut rng = rng_from_seed(derive_seed(cfg.seed, "means", 0));
    let normal = Normal::new(0.0, 2.0).expect("valid normal");
    let mut means = DMatrix::zeros(p, l);
    for k in 0..l {
        for j in BLOCK * k..BLOCK * (k + 1) {
            means[(j, k)] = normal.sample(&mut rng);
        }
    }
    let model = MixtureModel::new(means, sigma_w, pi)?;
    draw_sets(model, cfg.n, cfg.n_test, cfg.seed)
}

/// Low-rank scenarios with balanced classes: `M = eta A alpha`, `A` a random
/// orthonormal `p x r` frame, `alpha_ij ~ N(0, 32/r)`.
pub fn gen_lowrank_scenario(cfg: &LowRankScenarioConfig) -> Result<ScenarioDraw> {
    cfg.validate()?;
    let (p, l, r) = (cfg.p, cfg.n_classes, cfg.rank);
    let mut rng = rng_from_seed(derive_seed(cfg.seed, "means", 0));
    let a = random_orthonormal(p, r, &mut rng);
    let normal = Normal::new(0.0, (32.0 / r as f64).sqrt()).expect("valid normal");
    let coef = DMatrix::from_fn(r, l, |_, _| normal.sample(&mut rng));
    let means = &a * coef * cfg.eta;
    let sigma_w = match cfg.variant {
        LowRankVariant::Model1 => DMatrix::from_fn(p, p, |i, j| cfg.rho.powi(i.abs_diff(j) as i32)),
        LowRankVariant::Model2 => {
            let sigma_z = DMatrix::from_fn(r, r, |i, j| 0.6f64.powi(i.abs_diff(j) as i32));
            let noise = gen_ar1_scaled_cov(p, cfg.rho, 0.0, 1.0, derive_seed(cfg.seed, "covariance", 0))?;
            let signal = &a * sigma_z * a.transpose() * (cfg.eta * cfg.eta);
            crate::linalg::symmetrize(&(signal + noise))
        }
    };
    let pi = gen_class_probs(l, 0.0, 0)?;
    let model = MixtureModel::new(means, sigma_w, pi)?;
    draw_sets(model, cfg.n, cfg.n_test, cfg.seed)
}

/// Fraction of test rows whose prediction differs from the true label.
pub fn evaluate<F>(predict: F, test: &LabeledDataset) -> Result<f64>
where
    F: Fn(&DMatrix<f64>) -> Result<Vec<usize>>,
{
    if test.n_samples() == 0 {
        return Err(LdrrError::InvalidArgument("empty test set".into()));
    }
    let pred = predict(test.x())?;
    if pred.len() != test.n_samples() {
        return Err(LdrrError::DimensionMismatch {
            expected: format!("{} predictions", test.n_samples()),
            found: format!("{}", pred.len()),
        });
    }
    let wrong = pred.iter().zip(test.labels()).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / test.n_samples() as f64)
}

/// A random centered mixture: `Sigma_W = G G^T / p + 0.5 I` with Gaussian
/// `G`, means `N(0, 1)` shifted so that `M pi = 0`, priors from
/// [`gen_class_probs`] with `alpha = 1`.
pub fn random_mixture_model(p: usize, n_classes: usize, seed: u64) -> Result<MixtureModel> {
    if p == 0 || n_classes == 0 {
        return Err(LdrrError::InvalidArgument("need p >= 1 and L >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let g: DMatrix<f64> = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(&mut rng));
    let sigma_w = crate::linalg::symmetrize(&(&g * g.transpose() / p as f64 + DMatrix::identity(p, p) * 0.5));
    let means: DMatrix<f64> = DMatrix::from_fn(p, n_classes, |_, _| StandardNormal.sample(&mut rng));
    let pi = gen_class_probs(n_classes, 1.0, derive_seed(seed, "class_probs", 0))?;
    Ok(MixtureModel::new(means, sigma_w, pi)?.center())
}
