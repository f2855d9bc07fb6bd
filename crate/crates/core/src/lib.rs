//! Sampling and reconstruction of noisy bandlimited graph signals.
//!
//! A `k`-bandlimited signal lives in the span of the `k` lowest-frequency
//! eigenvectors `U_k` of a graph shift operator. Observing it on a vertex set
//! `S` under white noise and reconstructing by minimal-norm least squares
//! gives an expected squared error that splits exactly into a noiseless part
//! and a noise-sensitivity part:
//!
//! ```text
//! E[MSE_S] = ‖U_k − R_S M_S U_k‖²_F + σ² ‖R_S‖²_F,    σ² = k / (N · SNR)
//! ```
//!
//! Removing a vertex `v` from `S` lowers the expected error exactly when the
//! SNR is below the threshold `(k/N) · (‖R_S‖²_F − ‖R_{S∖v}‖²_F)`, so more
//! samples are not always better. This crate computes all of these quantities
//! exactly, checks them against Monte Carlo, and runs the sweeps that show the
//! effect on random graph models.
//!
//! Modules, bottom-up:
//!
//! - [`graph`]: Erdős–Rényi, Barabási–Albert and stochastic block model
//!   generators plus Laplacian shift operators.
//! - [`spectral`]: dense eigendecomposition, band selection, projector and
//!   leverage scores.
//! - [`sampling`]: sample sets, A/D/E-optimal greedy selection and
//!   leverage-weighted random selection.
//! - [`reconstruction`]: least-squares and Laplacian-regularised operators.
//! - [`analysis`]: expected-MSE decomposition, removal effects, SNR thresholds
//!   and the Monte Carlo oracle.
//! - [`experiments`]: configurable sweeps, CSV/SVG output and the batch
//!   theorem checker.

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod reconstruction;
pub mod sampling;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{Graph, ShiftOperatorKind};
pub use reconstruction::{Method, Observation, ReconstructionOperator};
pub use sampling::{Criterion, SampleSet};
pub use spectral::{BandBasis, SpectralBasis};

/// Library version recorded in every output's metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
