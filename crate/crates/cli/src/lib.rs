//! Command-line frontend for LDRR: CSV ingestion, model files, and the
//! `simulate`, `fit`, `cv`, `predict`, `evaluate` and `project` subcommands.

pub mod args;
pub mod commands;
pub mod dataset;
pub mod error;
pub mod model_file;

pub use commands::run_cli;
pub use dataset::{load_csv_dataset, CsvDataset, DatasetError};
pub use error::CliError;
pub use model_file::{load_model, save_model, Classifier, ModelFileError, SavedModel};
