//! Model persistence. Every float is stored as the 16 hex digits of its IEEE
//! bit pattern, so a save/load round trip is exact.

use std::path::Path;

use ldrr::ldrr::{ClassStats, FeatureTransform, RegressionSummary};
use ldrr::{LdrrFModel, LdrrModel, PenaltyConfig};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelFileError {
    #[error("cannot access {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
}

/// Row-major matrix with hex-encoded entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HexMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<String>,
}

fn encode(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn decode(s: &str) -> Result<f64, ModelFileError> {
    if s.len() != 16 {
        return Err(ModelFileError::Malformed(format!("bad float encoding '{s}'")));
    }
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| ModelFileError::Malformed(format!("bad float encoding '{s}'")))
}

impl HexMatrix {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| encode(m[(i, j)]))).collect();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        Self::from_matrix(&DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>, ModelFileError> {
        if self.data.len() != self.rows * self.cols {
            return Err(ModelFileError::Malformed(format!(
                "matrix declares {}x{} but holds {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        let vals: Vec<f64> = self.data.iter().map(|s| decode(s)).collect::<Result<_, _>>()?;
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &vals))
    }

    pub fn to_vector(&self) -> Result<DVector<f64>, ModelFileError> {
        if self.cols != 1 {
            return Err(ModelFileError::Malformed("expected a column vector".into()));
        }
        Ok(self.to_matrix()?.column(0).into_owned())
    }
}

/// Settings used to produce the model, echoed for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitEcho {
    pub seed: u64,
    pub penalty: String,
    pub lambda: String,
    pub alpha: f64,
    pub fisher: bool,
    pub k: Option<usize>,
    pub standardize: bool,
    pub cv_folds: usize,
    pub cv_grid: usize,
    pub label_column: String,
    pub train: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EncodedStats {
    means: HexMatrix,
    pi: HexMatrix,
    counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EncodedRegression {
    objective: String,
    n_iters: usize,
    converged: bool,
    selected_rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum EncodedModel {
    Ldrr {
        b_hat: HexMatrix,
        h_hat: HexMatrix,
        b_star_hat: HexMatrix,
        h_min_singular: String,
        h_max_singular: String,
    },
    LdrrF {
        b_hat: HexMatrix,
        c_b: HexMatrix,
        c_w: HexMatrix,
        directions: HexMatrix,
        eigenvalues: HexMatrix,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Envelope {
    format_version: u32,
    class_names: Vec<String>,
    feature_names: Vec<String>,
    config: FitEcho,
    penalty: PenaltyConfig,
    train_mean: HexMatrix,
    train_scale: Option<HexMatrix>,
    stats: EncodedStats,
    regression: EncodedRegression,
    model: EncodedModel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Ldrr(LdrrModel),
    LdrrF(LdrrFModel),
}

impl Classifier {
    pub fn kind(&self) -> &'static str {
        match self {
            Classifier::Ldrr(_) => "ldrr",
            Classifier::LdrrF(_) => "ldrr_f",
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> ldrr::Result<Vec<usize>> {
        match self {
            Classifier::Ldrr(m) => m.predict(x),
            Classifier::LdrrF(m) => m.predict(x),
        }
    }

    pub fn penalty(&self) -> PenaltyConfig {
        match self {
            Classifier::Ldrr(m) => m.penalty,
            Classifier::LdrrF(m) => m.penalty,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Classifier::Ldrr(m) => m.n_features(),
            Classifier::LdrrF(m) => m.n_features(),
        }
    }
}

/// A classifier together with its name tables and fit settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub classifier: Classifier,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub config: FitEcho,
}

fn parts(c: &Classifier) -> (&FeatureTransform, &ClassStats, &RegressionSummary, PenaltyConfig) {
    match c {
        Classifier::Ldrr(m) => (&m.transform, &m.stats, &m.regression, m.penalty),
        Classifier::LdrrF(m) => (&m.transform, &m.stats, &m.regression, m.penalty),
    }
}

impl SavedModel {
    pub fn to_json(&self) -> String {
        let (transform, stats, reg, penalty) = parts(&self.classifier);
        let model = match &self.classifier {
            Classifier::Ldrr(m) => EncodedModel::Ldrr {
                b_hat: HexMatrix::from_matrix(&m.b_hat),
                h_hat: HexMatrix::from_matrix(&m.h_hat),
                b_star_hat: HexMatrix::from_matrix(&m.b_star_hat),
                h_min_singular: encode(m.h_min_singular),
                h_max_singular: encode(m.h_max_singular),
            },
            Classifier::LdrrF(m) => EncodedModel::LdrrF {
                b_hat: HexMatrix::from_matrix(&m.b_hat),
                c_b: HexMatrix::from_matrix(&m.c_b),
                c_w: HexMatrix::from_matrix(&m.c_w),
                directions: HexMatrix::from_matrix(&m.directions),
                eigenvalues: HexMatrix::from_vector(&m.eigenvalues),
            },
        };
        let env = Envelope {
            format_version: FORMAT_VERSION,
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
            config: self.config.clone(),
            penalty,
            train_mean: HexMatrix::from_vector(&transform.mean),
            train_scale: transform.scale.as_ref().map(HexMatrix::from_vector),
            stats: EncodedStats {
                means: HexMatrix::from_matrix(&stats.means),
                pi: HexMatrix::from_vector(&stats.pi),
                counts: stats.counts.clone(),
            },
            regression: EncodedRegression {
                objective: encode(reg.objective),
                n_iters: reg.n_iters,
                converged: reg.converged,
                selected_rank: reg.selected_rank,
            },
            model,
        };
        let mut s = serde_json::to_string_pretty(&env).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ModelFileError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ModelFileError::Malformed(e.to_string()))?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ModelFileError::Malformed("missing format_version".into()))?;
        if found != u64::from(FORMAT_VERSION) {
            return Err(ModelFileError::VersionMismatch {
                found: u32::try_from(found).unwrap_or(u32::MAX),
                expected: FORMAT_VERSION,
            });
        }
        let env: Envelope = serde_json::from_value(value).map_err(|e| ModelFileError::Malformed(e.to_string()))?;
        let transform = FeatureTransform {
            mean: env.train_mean.to_vector()?,
            scale: env.train_scale.as_ref().map(HexMatrix::to_vector).transpose()?,
        };
        let stats = ClassStats {
            means: env.stats.means.to_matrix()?,
            pi: env.stats.pi.to_vector()?,
            counts: env.stats.counts,
        };
        let regression = RegressionSummary {
            objective: decode(&env.regression.objective)?,
            n_iters: env.regression.n_iters,
            converged: env.regression.converged,
            selected_rank: env.regression.selected_rank,
        };
        let classifier = match env.model {
            EncodedModel::Ldrr {
                b_hat,
                h_hat,
                b_star_hat,
                h_min_singular,
                h_max_singular,
            } => Classifier::Ldrr(LdrrModel {
                transform,
                b_hat: b_hat.to_matrix()?,
                h_hat: h_hat.to_matrix()?,
                b_star_hat: b_star_hat.to_matrix()?,
                stats,
                penalty: env.penalty,
                h_min_singular: decode(&h_min_singular)?,
                h_max_singular: decode(&h_max_singular)?,
                regression,
            }),
            EncodedModel::LdrrF {
                b_hat,
                c_b,
                c_w,
                directions,
                eigenvalues,
            } => Classifier::LdrrF(LdrrFModel {
                transform,
                b_hat: b_hat.to_matrix()?,
                c_b: c_b.to_matrix()?,
                c_w: c_w.to_matrix()?,
                directions: directions.to_matrix()?,
                eigenvalues: eigenvalues.to_vector()?,
                stats,
                penalty: env.penalty,
                regression,
            }),
        };
        let saved = SavedModel {
            classifier,
            class_names: env.class_names,
            feature_names: env.feature_names,
            config: env.config,
        };
        saved.check_shapes()?;
        Ok(saved)
    }

    fn check_shapes(&self) -> Result<(), ModelFileError> {
        let (transform, stats, _, _) = parts(&self.classifier);
        let (p, l) = (self.feature_names.len(), self.class_names.len());
        let bad = |what: &str| Err(ModelFileError::Malformed(format!("inconsistent shape: {what}")));
        if transform.mean.len() != p || transform.scale.as_ref().is_some_and(|s| s.len() != p) {
            return bad("training mean/scale");
        }
        if stats.means.shape() != (p, l) || stats.pi.len() != l {
            return bad("class statistics");
        }
        match &self.classifier {
            Classifier::Ldrr(m) => {
                if m.b_hat.shape() != (p, l) || m.b_star_hat.shape() != (p, l) || m.h_hat.shape() != (l, l) {
                    return bad("regression matrices");
                }
            }
            Classifier::LdrrF(m) => {
                if m.b_hat.shape() != (p, l) || m.c_b.shape() != (l, l) || m.c_w.shape() != (l, l) || m.directions.nrows() != l {
                    return bad("regression matrices");
                }
            }
        }
        Ok(())
    }
}

pub fn save_model(model: &SavedModel, path: &Path) -> Result<(), ModelFileError> {
    std::fs::write(path, model.to_json()).map_err(|e| ModelFileError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

pub fn load_model(path: &Path) -> Result<SavedModel, ModelFileError> {
    let text = std::fs::read_to_string(path).map_err(|e| ModelFileError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    SavedModel::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_round_trip_is_exact() {
        for v in [0.1, -0.0, f64::MIN_POSITIVE / 3.0, f64::NAN, 1e300, -7.25] {
            let back = decode(&encode(v)).unwrap();
            assert_eq!(back.to_bits(), v.to_bits());
        }
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let h = HexMatrix::from_matrix(&m);
        assert_eq!(h.data[1], encode(2.0));
        assert_eq!(h.to_matrix().unwrap(), m);
        assert!(decode("zz").is_err());
    }
}
