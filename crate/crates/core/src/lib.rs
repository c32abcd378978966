//! Physics-informed convolutional autoencoder (PIConvAE) for detecting
//! false-data-injection attacks on distribution-grid telemetry.
//!
//! The crate is `no_std` + `alloc`. Everything here is pure computation:
//!
//! - [`telemetry`]: six-channel measurement frames, a Kirchhoff-consistent
//!   synthetic generator, MinMax normalization and sliding windows.
//! - [`attacks`]: multiplicative false-data injection and target scheduling.
//! - [`neural`]: tensors, layers with analytic backward passes, Adam and a
//!   finite-difference gradient checker.
//! - [`model`]: the autoencoder, its data + physics loss, alternating
//!   encoder/decoder training with early stopping, and the binary checkpoint
//!   codec.
//! - [`scoring`]: reconstruction and physics anomaly scores, thresholds and
//!   confusion-matrix metrics.
//!
//! File and CLI handling lives in the `piconvae` companion crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod attacks;
pub mod error;
pub mod model;
pub mod neural;
pub mod scoring;
pub mod telemetry;

pub use error::{Error, Result};
