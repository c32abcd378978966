//! File formats, run configuration, manifests and commands behind the
//! `piconvae` binary.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod manifest;

pub use config::{AttackSpec, RunConfig, SweepSpec};
pub use error::{CliError, CliResult};
pub use manifest::{Invocation, Manifest};
