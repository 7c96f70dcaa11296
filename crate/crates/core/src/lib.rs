//! Design of zero-delay source-channel mappings for a Gaussian source with
//! decoder side information.
//!
//! The crate builds globally optimized encoder/decoder pairs by deterministic
//! annealing over randomized piecewise-affine encoders, and provides the
//! baselines they are measured against: greedy descent on the encoder table,
//! noisy-channel relaxation, the linear mapping, and the theoretical OPTA
//! bound.
//!
//! Modules:
//! - [`gauss`]: densities, grids, quadrature.
//! - [`codec`]: encoder and decoder representations with interpolation.
//! - [`cost`]: decoder updates, cost/entropy/free-energy evaluation, gradients.
//! - [`optim`]: the four design procedures and the OPTA bound.
//! - [`harness`]: Monte Carlo validation, dB metrics, benchmark sweeps.

pub mod codec;
pub mod cost;
pub mod error;
pub mod gauss;
pub mod harness;
pub mod optim;

pub use codec::{AffineModel, DecoderTable, StructuredEncoder, TabulatedEncoder};
pub use cost::{CostReport, EncoderRef};
pub use error::{Error, Result};
pub use gauss::{default_grids, grids_with_counts, Grid1D, GridCounts, GridSet, SourceChannelModel};
pub use harness::{CurvePoint, McEstimate, Method, SweepConfig, SweepRecord};
pub use optim::{AnnealConfig, AnnealOutcome, GreedyConfig, OptimizationTrace};
