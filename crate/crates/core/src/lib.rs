//! Linear discriminant analysis through penalized regression of one-hot
//! labels on features.
//!
//! The regression matrix `B` of `Y` on `X` and the discriminant directions
//! `B* = Sigma_W^{-1} M` are linked by `B* = B H^{-1}` with
//! `H = D_pi - B^T Sigma B`. Any penalized estimate `B_hat` therefore yields
//! a plug-in classifier through `H_hat = n^{-1}(Y^T Y - B_hat^T X^T X B_hat)`
//! and `B*_hat = B_hat H_hat^+`.
//!
//! Modules:
//! * [`mixture`]: population model, Bayes rule and the exact identities
//! * [`regression`]: penalized multivariate least-squares solvers and grids
//! * [`cv`]: stratified K-fold tuning
//! * [`ldrr`]: the plug-in discriminant classifier
//! * [`fisher`]: the reduced-dimension Fisher variant
//! * [`simulation`]: synthetic scenarios and the repeated-experiment runner

pub mod cv;
pub mod dataset;
pub mod error;
pub mod fisher;
pub mod ldrr;
pub mod linalg;
pub mod mixture;
pub mod regression;
pub mod rng;
pub mod simulation;

pub use dataset::LabeledDataset;
pub use error::{LdrrError, Result};
pub use fisher::{fit_ldrr_f, LdrrFModel};
pub use ldrr::{fit_ldrr, FitOptions, LdrrModel};
pub use mixture::MixtureModel;
pub use regression::{PenaltyConfig, PenaltyKind, RegressionFit, SolverOptions};
