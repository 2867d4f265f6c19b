use nalgebra::DMatrix;

use crate::error::{LdrrError, Result};

/// Feature matrix `X` (`n x p`, rows are samples) paired with the one-hot
/// label matrix `Y` (`n x L`).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    labels: Vec<usize>,
}

impl LabeledDataset {
    /// Builds a dataset from integer labels in `0..n_classes`.
    pub fn from_labels(x: DMatrix<f64>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.len() != x.nrows() {
            return Err(LdrrError::DimensionMismatch {
                expected: format!("{} labels", x.nrows()),
                found: format!("{} labels", labels.len()),
            });
        }
        if n_classes == 0 {
            return Err(LdrrError::InvalidArgument("need at least one class".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&c| c >= n_classes) {
            return Err(LdrrError::InvalidArgument(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LdrrError::InvalidArgument("non-finite feature value".into()));
        }
        let mut y = DMatrix::zeros(x.nrows(), n_classes);
        for (i, &c) in labels.iter().enumerate() {
            y[(i, c)] = 1.0;
        }
        Ok(Self { x, y, labels })
    }

    /// Builds a dataset from a one-hot matrix; every row must contain exactly
    /// one 1 and zeros elsewhere.
    pub fn from_one_hot(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        if y.nrows() != x.nrows() {
            return Err(LdrrError::DimensionMismatch {
                expected: format!("Y with {} rows", x.nrows()),
                found: format!("{} rows", y.nrows()),
            });
        }
        let mut labels = Vec::with_capacity(y.nrows());
        for (i, row) in y.row_iter().enumerate() {
            let ones: Vec<usize> = (0..row.len()).filter(|&k| row[k] == 1.0).collect();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones.len() != 1 || zeros + 1 != row.len() {
                return Err(LdrrError::InvalidArgument(format!("row {i} of Y is not one-hot")));
            }
            labels.push(ones[0]);
        }
        Self::from_labels(x, labels, y.ncols())
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.y.ncols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &c in &self.labels {
            counts[c] += 1;
        }
        counts
    }

    /// Errors with `EmptyClass` if some class has no samples.
    pub fn require_all_classes(&self) -> Result<()> {
        match self.class_counts().iter().position(|&c| c == 0) {
            Some(k) => Err(LdrrError::EmptyClass(k)),
            None => Ok(()),
        }
    }

    /// Rows selected by `idx`, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let x = self.x.select_rows(idx);
        let y = self.y.select_rows(idx);
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Self { x, y, labels }
    }

    /// Same labels with a replaced feature matrix of identical shape.
    pub fn with_features(&self, x: DMatrix<f64>) -> Result<Self> {
        crate::error::check_shape("X", self.x.shape(), x.shape())?;
        Ok(Self {
            x,
            y: self.y.clone(),
            labels: self.labels.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_roundtrip() {
        let x = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let d = LabeledDataset::from_labels(x.clone(), vec![0, 1, 0], 2).unwrap();
        assert_eq!(d.y(), &DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]));
        let d2 = LabeledDataset::from_one_hot(x, d.y().clone()).unwrap();
        assert_eq!(d, d2);
        assert_eq!(d.class_counts(), vec![2, 1]);
    }

    #[test]
    fn rejects_bad_rows() {
        let x = DMatrix::zeros(2, 1);
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(LabeledDataset::from_one_hot(x.clone(), y).is_err());
        let y = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.0, 1.0]);
        assert!(LabeledDataset::from_one_hot(x.clone(), y).is_err());
        assert!(LabeledDataset::from_labels(x, vec![0, 3], 2).is_err());
    }

    #[test]
    fn empty_class_detected() {
        let d = LabeledDataset::from_labels(DMatrix::zeros(2, 1), vec![0, 0], 3).unwrap();
        assert_eq!(d.require_all_classes(), Err(LdrrError::EmptyClass(1)));
    }
}
