use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::tensor::Tensor;
use crate::{Error, Result};

/// `y = x` for `x > 0`, `slope·x` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakyRelu {
    pub slope: f64,
}

impl LeakyRelu {
    pub fn forward(&self, x: &Tensor) -> (Tensor, Vec<bool>) {
        let mask: Vec<bool> = x.data().iter().map(|&v| v > 0.0).collect();
        let y = x
            .data()
            .iter()
            .zip(&mask)
            .map(|(&v, &pos)| if pos { v } else { self.slope * v })
            .collect();
        (Tensor::new(x.shape().to_vec(), y).expect("same length"), mask)
    }

    pub fn backward(&self, grad_out: &Tensor, positive: &[bool]) -> Result<Tensor> {
        if grad_out.len() != positive.len() {
            return Err(Error::Shape("leaky relu grad does not match cached forward".into()));
        }
        let g = grad_out
            .data()
            .iter()
            .zip(positive)
            .map(|(&g, &pos)| if pos { g } else { self.slope * g })
            .collect();
        Tensor::new(grad_out.shape().to_vec(), g)
    }
}

/// Inverted dropout: kept units are scaled by `1/(1 - rate)` in training,
/// identity in evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Dropout> {
        if (0.0..1.0).contains(&rate) {
            Ok(Dropout { rate })
        } else {
            Err(Error::Config(format!("dropout rate must lie in [0, 1), got {rate}")))
        }
    }

    /// Returns the output and the per-element scale (`None` when inactive).
    pub fn forward<R: Rng + ?Sized>(&self, x: &Tensor, train: bool, rng: &mut R) -> (Tensor, Option<Vec<f64>>) {
        if !train || self.rate == 0.0 {
            return (x.clone(), None);
        }
        let keep = 1.0 - self.rate;
        let scale: Vec<f64> = (0..x.len())
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let y = x.data().iter().zip(&scale).map(|(v, s)| v * s).collect();
        (Tensor::new(x.shape().to_vec(), y).expect("same length"), Some(scale))
    }

    pub fn backward(&self, grad_out: &Tensor, scale: Option<&[f64]>) -> Result<Tensor> {
        match scale {
            None => Ok(grad_out.clone()),
            Some(s) if s.len() == grad_out.len() => {
                let g = grad_out.data().iter().zip(s).map(|(g, s)| g * s).collect();
                Tensor::new(grad_out.shape().to_vec(), g)
            }
            Some(_) => Err(Error::Shape("dropout grad does not match cached mask".into())),
        }
    }
}
