//! CSV ingestion: a header row, one label column, numeric feature columns.

use std::path::Path;

use ldrr::LabeledDataset;
use nalgebra::DMatrix;
use thiserror::Error;

pub const DEFAULT_LABEL_COLUMN: &str = "label";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    /// `row` is 1-based over data rows (the header is row 0).
    #[error("parse error at row {row}, column '{column}': {reason}")]
    Parse { row: usize, column: String, reason: String },
    #[error("label column '{name}' not found; available columns: {}", available.join(", "))]
    MissingLabelColumn { name: String, available: Vec<String> },
    #[error("non-numeric feature at row {row}, column '{column}': '{value}'")]
    NonNumericFeature { row: usize, column: String, value: String },
    #[error("missing feature column '{0}'")]
    MissingFeature(String),
    #[error("unknown class '{label}' at row {row}")]
    UnknownClass { row: usize, label: String },
    #[error("{0}")]
    Invalid(String),
}

/// Rows of a CSV file with the label column split off.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub feature_names: Vec<String>,
    pub x: DMatrix<f64>,
    /// Raw label strings, when the label column is present.
    pub labels: Option<Vec<String>>,
}

/// A labeled dataset with its class-name and feature-name tables.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvDataset {
    pub data: LabeledDataset,
    /// Class names in first-appearance order; index = class id.
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
}

fn io_err(path: &Path, e: impl ToString) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// Reads a CSV file. The label column is optional here; every other column
/// must be numeric and nonempty.
pub fn read_csv_table(path: &Path, label_column: &str) -> Result<CsvTable, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let headers: Vec<String> = reader.headers().map_err(|e| io_err(path, e))?.iter().map(str::to_string).collect();
    let label_idx = headers.iter().position(|h| h == label_column);
    let feature_idx: Vec<usize> = (0..headers.len()).filter(|&j| Some(j) != label_idx).collect();
    if feature_idx.is_empty() {
        return Err(DatasetError::Invalid("no feature columns".into()));
    }
    let mut values = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DatasetError::Parse {
            row,
            column: String::from("-"),
            reason: e.to_string(),
        })?;
        if record.len() != headers.len() {
            let column = headers.get(record.len()).cloned().unwrap_or_else(|| format!("#{}", record.len() + 1));
            return Err(DatasetError::Parse {
                row,
                column,
                reason: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for &j in &feature_idx {
            let cell = &record[j];
            if cell.is_empty() {
                return Err(DatasetError::Parse {
                    row,
                    column: headers[j].clone(),
                    reason: "missing value".into(),
                });
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(DatasetError::NonNumericFeature {
                        row,
                        column: headers[j].clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
        if let (Some(j), Some(out)) = (label_idx, labels.as_mut()) {
            if record[j].is_empty() {
                return Err(DatasetError::Parse {
                    row,
                    column: headers[j].clone(),
                    reason: "missing label".into(),
                });
            }
            out.push(record[j].to_string());
        }
    }
    let n = values.len() / feature_idx.len();
    Ok(CsvTable {
        feature_names: feature_idx.iter().map(|&j| headers[j].clone()).collect(),
        x: DMatrix::from_row_slice(n, feature_idx.len(), &values),
        labels,
    })
}

/// Loads a training set. Classes are numbered in first-appearance order.
pub fn load_csv_dataset(path: &Path, label_column: &str) -> Result<CsvDataset, DatasetError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let headers: Vec<String> = reader.headers().map_err(|e| io_err(path, e))?.iter().map(|h| h.trim().to_string()).collect();
    if !headers.iter().any(|h| h == label_column) {
        return Err(DatasetError::MissingLabelColumn {
            name: label_column.to_string(),
            available: headers,
        });
    }
    let table = read_csv_table(path, label_column)?;
    if table.x.nrows() == 0 {
        return Err(DatasetError::Invalid("no data rows".into()));
    }
    let raw = table.labels.expect("label column present");
    let mut class_names: Vec<String> = Vec::new();
    let labels: Vec<usize> = raw
        .iter()
        .map(|s| match class_names.iter().position(|c| c == s) {
            Some(k) => k,
            None => {
                class_names.push(s.clone());
                class_names.len() - 1
            }
        })
        .collect();
    let data = LabeledDataset::from_labels(table.x, labels, class_names.len()).map_err(|e| DatasetError::Invalid(e.to_string()))?;
    Ok(CsvDataset {
        data,
        class_names,
        feature_names: table.feature_names,
    })
}

/// Features for an already-fitted model, reordered to `feature_names`, with
/// labels mapped through `class_names` when the label column is present.
pub fn load_for_model(
    path: &Path,
    label_column: &str,
    feature_names: &[String],
    class_names: &[String],
) -> Result<(DMatrix<f64>, Option<Vec<usize>>), DatasetError> {
    let table = read_csv_table(path, label_column)?;
    let cols: Vec<usize> = feature_names
        .iter()
        .map(|f| {
            table
                .feature_names
                .iter()
                .position(|h| h == f)
                .ok_or_else(|| DatasetError::MissingFeature(f.clone()))
        })
        .collect::<Result<_, _>>()?;
    let x = DMatrix::from_fn(table.x.nrows(), cols.len(), |i, j| table.x[(i, cols[j])]);
    let labels = match table.labels {
        None => None,
        Some(raw) => Some(
            raw.iter()
                .enumerate()
                .map(|(i, s)| {
                    class_names.iter().position(|c| c == s).ok_or_else(|| DatasetError::UnknownClass {
                        row: i + 1,
                        label: s.clone(),
                    })
                })
                .collect::<Result<_, _>>()?,
        ),
    };
    Ok((x, labels))
}
