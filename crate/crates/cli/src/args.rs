//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ldrr::cv::{CvLoss, DEFAULT_FOLDS};
use ldrr::simulation::LambdaChoice;
use ldrr::PenaltyKind;
use serde::Serialize;

use crate::dataset::DEFAULT_LABEL_COLUMN;
use crate::error::CliError;

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "ldrr", version, about = "Linear discriminant analysis via penalized regression of one-hot labels")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Base seed for every random choice (folds, simulated data).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output path for the command's CSV result (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress the human-readable summary on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Run a repeated simulation study and write a report CSV.
    Simulate(SimulateArgs),
    /// Fit a classifier on a CSV file and save it.
    Fit(FitArgs),
    /// Cross-validate the penalty level and write the CV table.
    Cv(CvArgs),
    /// Predict class names for the rows of a CSV file.
    Predict(ApplyArgs),
    /// Misclassification rate of a saved model on a labeled CSV file.
    Evaluate(ApplyArgs),
    /// Discriminant coordinates of each row (models fitted with --fisher).
    Project(ApplyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyName {
    Lasso,
    Enet,
    Grplasso,
    Rr,
    RrRidge,
    Ridge,
    None,
}

impl PenaltyName {
    pub fn as_str(self) -> &'static str {
        match self {
            PenaltyName::Lasso => "lasso",
            PenaltyName::Enet => "enet",
            PenaltyName::Grplasso => "grplasso",
            PenaltyName::Rr => "rr",
            PenaltyName::RrRidge => "rr-ridge",
            PenaltyName::Ridge => "ridge",
            PenaltyName::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        <Self as ValueEnum>::from_str(s, false).ok()
    }

    pub fn kind(self, alpha: f64) -> PenaltyKind {
        match self {
            PenaltyName::Lasso => PenaltyKind::Lasso,
            PenaltyName::Enet => PenaltyKind::ElasticNet { alpha },
            PenaltyName::Grplasso => PenaltyKind::GroupLassoRidge { alpha },
            PenaltyName::Rr => PenaltyKind::ReducedRank,
            PenaltyName::RrRidge => PenaltyKind::ReducedRankRidge { alpha },
            PenaltyName::Ridge => PenaltyKind::Ridge,
            PenaltyName::None => PenaltyKind::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossName {
    Mse,
    Misclass,
}

impl LossName {
    pub fn loss(self) -> CvLoss {
        match self {
            LossName::Mse => CvLoss::RegressionMse,
            LossName::Misclass => CvLoss::Misclassification,
        }
    }
}

/// Penalty level and tuning settings shared by every fitting command.
#[derive(Debug, Clone, Args, Serialize)]
pub struct CvSettings {
    /// A nonnegative number, or `cv` to choose it by cross-validation.
    #[arg(long, default_value = "cv")]
    pub lambda: String,
    /// Mixing weight of mixed penalties (enet, grplasso, rr-ridge).
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,
    /// Number of lambda values on the CV grid.
    #[arg(long, default_value_t = 30)]
    pub grid: usize,
    #[arg(long, value_enum, default_value_t = LossName::Mse)]
    pub loss: LossName,
    /// Rescale features to unit variance before fitting (centering is always on).
    #[arg(long)]
    pub standardize: bool,
}

impl CvSettings {
    pub fn lambda_choice(&self) -> Result<LambdaChoice, CliError> {
        parse_lambda(&self.lambda, self.grid, self.folds, self.loss.loss())
    }
}

/// Penalty family plus [`CvSettings`].
#[derive(Debug, Clone, Args, Serialize)]
pub struct TuningArgs {
    #[arg(long, value_enum, default_value_t = PenaltyName::Lasso)]
    pub penalty: PenaltyName,
    #[command(flatten)]
    pub cv: CvSettings,
}

impl TuningArgs {
    pub fn kind(&self) -> PenaltyKind {
        self.penalty.kind(self.cv.alpha)
    }
}

pub fn parse_lambda(s: &str, n_grid: usize, n_folds: usize, loss: CvLoss) -> Result<LambdaChoice, CliError> {
    if s.eq_ignore_ascii_case("cv") {
        return Ok(LambdaChoice::Cv { n_grid, n_folds, loss });
    }
    match s.parse::<f64>() {
        Ok(lambda) if lambda.is_finite() && lambda >= 0.0 => Ok(LambdaChoice::Fixed { lambda }),
        _ => Err(CliError::Usage(format!("--lambda expects a nonnegative number or 'cv', got '{s}'"))),
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// Training CSV.
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, default_value = DEFAULT_LABEL_COLUMN)]
    pub label_column: String,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Fit the reduced-dimension (Fisher) variant.
    #[arg(long)]
    pub fisher: bool,
    /// Number of discriminant directions with --fisher (default: L - 1, capped by rank).
    #[arg(long)]
    pub k: Option<usize>,
    /// Where to write the model file.
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CvArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, default_value = DEFAULT_LABEL_COLUMN)]
    pub label_column: String,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ApplyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with the model's feature columns (label column optional for predict/project).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = DEFAULT_LABEL_COLUMN)]
    pub label_column: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    Sparse,
    Lowrank1,
    Lowrank2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VaryParam {
    N,
    P,
    Classes,
    Rho,
    Sigma,
    PriorAlpha,
    Rank,
    Eta,
}

impl VaryParam {
    pub fn as_str(self) -> &'static str {
        match self {
            VaryParam::N => "n",
            VaryParam::P => "p",
            VaryParam::Classes => "classes",
            VaryParam::Rho => "rho",
            VaryParam::Sigma => "sigma",
            VaryParam::PriorAlpha => "prior-alpha",
            VaryParam::Rank => "rank",
            VaryParam::Eta => "eta",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioName,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    /// Comma-separated methods: `bayes`, a penalty name, or `f-<penalty>`
    /// for the reduced-dimension variant.
    #[arg(long, default_value = "bayes,lasso,enet,grplasso,rr,rr-ridge")]
    pub methods: String,
    /// Parameter to sweep over `--values` (default: none).
    #[arg(long, value_enum)]
    pub vary: Option<VaryParam>,
    /// Comma-separated values for `--vary`.
    #[arg(long)]
    pub values: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Noise scale of the sparse scenario.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Class-imbalance exponent of the sparse scenario (0 = balanced).
    #[arg(long)]
    pub prior_alpha: Option<f64>,
    /// Rank of the low-rank scenarios.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Signal strength of the low-rank scenarios.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Monte-Carlo samples per rep for the Bayes error.
    #[arg(long, default_value_t = 20_000)]
    pub bayes_mc: usize,
    #[command(flatten)]
    pub cv: CvSettings,
}
