//! Joint range and angle-of-arrival estimation from OFDM channel state
//! information.
//!
//! The pipeline is:
//!
//! 1. [`signal`]: build or load a `K x N` CSI matrix.
//! 2. [`smoothing`]: sample decimated, strided sub-arrays and form the sample
//!    covariance.
//! 3. [`music`]: eigendecompose, pick the model order, and evaluate the 2D
//!    MUSIC pseudospectrum.
//! 4. [`detection`]: seed from a coarse grid, refine with Powell's method,
//!    gate with a CFAR threshold and cancel detected targets coherently.
//! 5. [`harness`]: Monte Carlo sweeps with missed-detection and RMSE metrics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod detection;
pub mod error;
pub mod harness;
pub mod music;
pub mod pipeline;
pub mod signal;
pub mod smoothing;

pub use error::{Error, Result};
