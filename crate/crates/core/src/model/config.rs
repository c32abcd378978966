use alloc::format;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::neural::LrSchedule;
use crate::telemetry::{CHANNELS, DEFAULT_WINDOW};
use crate::{Error, Result};

/// How the encoder and decoder are updated on each batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum UpdateMode {
    /// Encoder step with the decoder frozen, then a decoder step with the
    /// encoder frozen, each from a fresh forward pass.
    #[default]
    Alternating,
    /// One backward pass, both halves stepped together.
    Joint,
}

impl UpdateMode {
    pub fn name(self) -> &'static str {
        match self {
            UpdateMode::Alternating => "alternating",
            UpdateMode::Joint => "joint",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ModelConfig {
    pub window: usize,
    pub channels: usize,
    pub enc_filters: [usize; 2],
    pub enc_kernels: [usize; 2],
    pub bottleneck: usize,
    pub dropout: f64,
    pub leaky_slope: f64,
    /// L2 coefficient on conv/dense weights.
    pub lambda_reg: f64,
    pub alpha_d: f64,
    pub alpha_phy: f64,
    /// `false` trains the plain ConvAE baseline.
    pub physics_enabled: bool,
    /// Maximum number of epochs.
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Cap on batches per epoch; `None` makes every epoch a full pass.
    pub steps_per_epoch: Option<usize>,
    pub lr: LrSchedule,
    pub update: UpdateMode,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            window: DEFAULT_WINDOW,
            channels: CHANNELS,
            enc_filters: [64, 32],
            enc_kernels: [5, 3],
            bottleneck: 24,
            dropout: 0.2,
            leaky_slope: 0.2,
            lambda_reg: 1e-4,
            alpha_d: 1.0,
            alpha_phy: 1.0,
            physics_enabled: true,
            epochs: 1000,
            batch_size: 64,
            patience: 20,
            steps_per_epoch: None,
            lr: LrSchedule::default(),
            update: UpdateMode::Alternating,
            seed: 7,
        }
    }
}

impl ModelConfig {
    /// The baseline ConvAE: identical except that the physics terms are off.
    pub fn baseline(&self) -> ModelConfig {
        ModelConfig {
            physics_enabled: false,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("model config: {what}")));
        if self.channels != CHANNELS {
            return bad("exactly six channels are supported");
        }
        if self.window == 0 || self.bottleneck == 0 || self.batch_size == 0 {
            return bad("window, bottleneck and batch size must be positive");
        }
        if self.enc_filters.contains(&0) {
            return bad("filter counts must be positive");
        }
        if self.enc_kernels.iter().any(|k| k % 2 == 0) {
            return bad("kernel sizes must be odd");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.alpha_d >= 0.0 && self.alpha_phy >= 0.0 && self.lambda_reg >= 0.0) {
            return bad("loss weights and λ must be non-negative");
        }
        if !(self.lr.initial > 0.0 && self.lr.decay > 0.0) {
            return bad("learning rate and decay must be positive");
        }
        if self.steps_per_epoch == Some(0) {
            return bad("steps_per_epoch must be positive when set");
        }
        Ok(())
    }
}
