use thiserror::Error;

/// Errors produced by model construction, fitting and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LdrrError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model is not centered: max |M pi| = {0:e}")]
    NotCentered(f64),

    #[error("matrix {0} is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("design matrix X^T X is numerically singular (min/max eigenvalue ratio {0:e})")]
    SingularDesign(f64),

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("class {class} has {count} samples, fewer than {folds} folds")]
    ClassMissingInFold {
        class: usize,
        count: usize,
        folds: usize,
    },

    #[error("K = {k} exceeds the numerical rank {rank} of the whitened between-class matrix")]
    KTooLarge { k: usize, rank: usize },

    #[error("could not draw a training set containing every class after {0} attempts")]
    SamplingFailed(usize),
}

pub type Result<T> = std::result::Result<T, LdrrError>;

pub(crate) fn check_shape(what: &str, expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected != found {
        return Err(LdrrError::DimensionMismatch {
            expected: format!("{what} {}x{}", expected.0, expected.1),
            found: format!("{}x{}", found.0, found.1),
        });
    }
    Ok(())
}
