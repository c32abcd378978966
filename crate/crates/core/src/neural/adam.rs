use alloc::format;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::{Error, Result};

/// Step-decayed learning rate: `initial · decay^floor(index / interval)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LrSchedule {
    pub initial: f64,
    pub decay: f64,
    pub interval: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            initial: 1e-3,
            decay: 0.95,
            interval: 10,
        }
    }
}

impl LrSchedule {
    pub fn rate(&self, index: usize) -> f64 {
        let k = index / self.interval.max(1);
        self.initial * libm::pow(self.decay, k as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for one group of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first: Vec<Tensor>,
    pub second: Vec<Tensor>,
    /// Number of updates applied (drives bias correction).
    pub step: u64,
    pub schedule: LrSchedule,
    /// Index the schedule is evaluated at; the trainer advances it per epoch.
    pub schedule_index: usize,
    pub adam: AdamConfig,
}

impl OptimizerState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>, schedule: LrSchedule) -> OptimizerState {
        let first: Vec<Tensor> = params.into_iter().map(Tensor::zeros_like).collect();
        let second = first.clone();
        OptimizerState {
            first,
            second,
            step: 0,
            schedule,
            schedule_index: 0,
            adam: AdamConfig::default(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.schedule.rate(self.schedule_index)
    }

    /// One bias-corrected Adam update. Every gradient is checked before any
    /// parameter is touched, so a failed step leaves the state unchanged.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor], names: &[&str]) -> Result<()> {
        if params.len() != grads.len() || grads.len() != self.first.len() {
            return Err(Error::Shape(format!(
                "{} parameters, {} gradients, {} moment slots",
                params.len(),
                grads.len(),
                self.first.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || g.shape() != self.first[k].shape() {
                return Err(Error::Shape(format!("gradient {k} shape {:?} vs parameter {:?}", g.shape(), p.shape())));
            }
            if g.data().iter().any(|v| !v.is_finite()) {
                let name = names.get(k).copied().unwrap_or("?");
                return Err(Error::NonFinite(format!("gradient of {name}")));
            }
        }
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.adam;
        let t = self.step as f64;
        let c1 = 1.0 - libm::pow(beta1, t);
        let c2 = 1.0 - libm::pow(beta2, t);
        let lr = self.learning_rate();
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = self.first[k].data_mut();
            let v = self.second[k].data_mut();
            for (((pi, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *pi -= lr * mhat / (libm::sqrt(vhat) + eps);
            }
        }
        Ok(())
    }
}
