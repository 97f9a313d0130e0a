//! Panel econometrics for unbalanced country-year data: first-difference,
//! within and pooled estimators, cluster-robust covariances, the usual
//! specification tests, and a pipeline that turns long-format CSV sources
//! into regression tables.
//!
//! Numerical code is generic over [`Scalar`] (`f64` or `f32`); the aliases
//! below fix the scalar for the common case.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod estimators;
pub mod fixture;
pub mod ingest;
pub mod linalg;
pub mod montecarlo;
pub mod ols;
pub mod panel;
pub mod report;
pub mod scalar;
pub mod vcov;

pub use diagnostics::{
    breusch_pagan, breusch_pagan_het, hausman_aux, honda_lm, wooldridge_fd_serial, Effect, NullDistribution,
    SerialNull, TestResult,
};
pub use error::{ErrorClass, PanelError, Result};
pub use estimators::{fit, fit_first_differences, fit_pooled, fit_within, quasi_demean, Estimator, ModelSpec};
pub use ingest::{assemble_study_dataset, read_long_csv, share_matrix, ShareMethod, SourceSchema, StudyManifest};
pub use ols::{ols_fit, Design};
pub use panel::{Period, Record};
pub use scalar::Scalar;
pub use vcov::{vcov_arellano, vcov_classical, ClusterCorrection, CovarianceKind};

pub type PanelDataset = panel::PanelDataset<f64>;
pub type RegressionResult = estimators::RegressionResult<f64>;
pub type OlsFit = ols::OlsFit<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type CovarianceEstimate = vcov::CovarianceEstimate<f64>;

pub type PanelDatasetF32 = panel::PanelDataset<f32>;
pub type RegressionResultF32 = estimators::RegressionResult<f32>;
pub type MatrixF32 = linalg::Matrix<f32>;
