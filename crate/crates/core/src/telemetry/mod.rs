//! Six-channel grid telemetry: frames, the synthetic generator, MinMax
//! normalization, train/validation/test splits and sliding windows.

mod frame;
mod generator;
mod series;
mod window;

pub use frame::{Channel, MeasurementFrame, CHANNELS, PHYSICS_EPS};
pub use generator::{generate_synthetic, GeneratorConfig, LoadProfile, PvProfile, WindProfile};
pub use series::{MinMax, SeriesSet, Split};
pub use window::{fold_windows, windowize, windowize_rows, Aggregation, WindowBatch};

/// Window length used throughout the detector.
pub const DEFAULT_WINDOW: usize = 16;

/// Tolerance for Kirchhoff residuals on ingested (measured) data.
pub const INGEST_EPS: f64 = 1e-3;
