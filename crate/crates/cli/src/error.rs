use ldrr::LdrrError;
use thiserror::Error;

use crate::dataset::DatasetError;
use crate::model_file::ModelFileError;

/// Failure of a CLI run, classified by exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Numeric(_) => "numeric",
        }
    }

    /// Single line: `ldrr-error kind=<kind> code=<code>: <message>`.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace('\n', " ");
        format!("ldrr-error kind={} code={}: {}", self.kind(), self.exit_code(), msg)
    }
}

impl From<LdrrError> for CliError {
    fn from(e: LdrrError) -> Self {
        let msg = e.to_string();
        match e {
            LdrrError::InvalidArgument(_) => CliError::Usage(msg),
            LdrrError::DimensionMismatch { .. }
            | LdrrError::InvalidModel(_)
            | LdrrError::EmptyClass(_)
            | LdrrError::ClassMissingInFold { .. }
            | LdrrError::KTooLarge { .. } => CliError::Data(msg),
            LdrrError::NotCentered(_)
            | LdrrError::NotPositiveDefinite(_)
            | LdrrError::SingularDesign(_)
            | LdrrError::SamplingFailed(_) => CliError::Numeric(msg),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelFileError> for CliError {
    fn from(e: ModelFileError) -> Self {
        CliError::Data(e.to_string())
    }
}
