//! Mean-function estimation for densely sampled functional data.
//!
//! Curves observed on a common midpoint grid are projected onto an
//! orthonormal basis (Fourier or Haar), the pooled coefficients are
//! thresholded at data-driven levels, and simultaneous confidence bands are
//! built from the surviving coefficients.

pub mod bands;
pub mod error;
pub mod estimator;
pub mod grid_basis;
pub mod io;
pub mod metrics;
pub mod process_sim;
pub mod quantile;
pub mod scalar;
pub mod selector;

pub use bands::{BandKind, ConfidenceBand};
pub use error::{Error, Result};
pub use estimator::{CoefficientStats, MeanEstimate, Rule, TheoreticalLevels};
pub use grid_basis::{BasisFamily, BasisMatrix, Grid};
pub use process_sim::{CurvePanel, PanelConfig, ProcessKind, ProcessSpec, SignalSpec};
pub use scalar::Real;
pub use selector::{CandidateSpec, SelectionResult};

pub type Grid64 = Grid<f64>;
pub type BasisMatrix64 = BasisMatrix<f64>;
pub type CurvePanel64 = CurvePanel<f64>;
pub type PanelConfig64 = PanelConfig<f64>;
pub type CoefficientStats64 = CoefficientStats<f64>;
pub type MeanEstimate64 = MeanEstimate<f64>;
pub type ConfidenceBand64 = ConfidenceBand<f64>;

pub type Grid32 = Grid<f32>;
pub type BasisMatrix32 = BasisMatrix<f32>;
pub type CurvePanel32 = CurvePanel<f32>;
pub type PanelConfig32 = PanelConfig<f32>;
pub type CoefficientStats32 = CoefficientStats<f32>;
pub type MeanEstimate32 = MeanEstimate<f32>;
pub type ConfidenceBand32 = ConfidenceBand<f32>;

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctests;
