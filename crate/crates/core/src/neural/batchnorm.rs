use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::tensor::Tensor;
use crate::{Error, Result};

pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_EPS: f64 = 1e-5;

/// Per-channel batch normalization over `(N, C)` or `(N, C, L)` inputs.
///
/// Statistics are taken over every axis except the channel axis. Running
/// statistics start from the first training batch and then follow
/// `running = momentum·running + (1 - momentum)·batch` (biased variance).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    pub eps: f64,
    /// Number of training batches folded into the running statistics.
    pub batches_seen: u64,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    shape: Vec<usize>,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    /// Batch statistics were used (gradient flows through mean and variance).
    batch_stats: bool,
}

fn layout(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match *shape {
        [n, c] => Ok((n, c, 1)),
        [n, c, l] => Ok((n, c, l)),
        _ => Err(Error::Shape(format!("batchnorm expects rank 2 or 3, got {shape:?}"))),
    }
}

impl BatchNorm {
    pub fn new(channels: usize) -> BatchNorm {
        BatchNorm {
            gamma: Tensor::full(&[channels], 1.0),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], 1.0),
            momentum: DEFAULT_MOMENTUM,
            eps: DEFAULT_EPS,
            batches_seen: 0,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Training mode normalizes with batch statistics and updates the running
    /// ones; evaluation mode uses the running statistics.
    pub fn forward(&mut self, x: &Tensor, train: bool) -> Result<(Tensor, BatchNormCache)> {
        if !train {
            return self.forward_eval(x);
        }
        let (n, c, l) = self.check(x)?;
        if n * l < 2 {
            return Err(Error::Shape("batchnorm training needs at least two values per channel".into()));
        }
        let count = (n * l) as f64;
        let mut mean = vec![0.0; c];
        let mut var = vec![0.0; c];
        for ni in 0..n {
            for ci in 0..c {
                mean[ci] += x.data()[(ni * c + ci) * l..(ni * c + ci + 1) * l].iter().sum::<f64>();
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        for ni in 0..n {
            for ci in 0..c {
                var[ci] += x.data()[(ni * c + ci) * l..(ni * c + ci + 1) * l]
                    .iter()
                    .map(|v| (v - mean[ci]) * (v - mean[ci]))
                    .sum::<f64>();
            }
        }
        var.iter_mut().for_each(|v| *v /= count);
        let first = self.batches_seen == 0;
        let m = self.momentum;
        for ci in 0..c {
            let rm = &mut self.running_mean.data_mut()[ci];
            *rm = if first { mean[ci] } else { m * *rm + (1.0 - m) * mean[ci] };
            let rv = &mut self.running_var.data_mut()[ci];
            *rv = if first { var[ci] } else { m * *rv + (1.0 - m) * var[ci] };
        }
        self.batches_seen += 1;
        self.normalize(x, &mean, &var, true)
    }

    /// Normalizes with the running statistics; the layer is not modified.
    pub fn forward_eval(&self, x: &Tensor) -> Result<(Tensor, BatchNormCache)> {
        self.check(x)?;
        if self.batches_seen == 0 {
            return Err(Error::NoRunningStatistics);
        }
        self.normalize(x, self.running_mean.data(), self.running_var.data(), false)
    }

    fn check(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        let (n, c, l) = layout(x.shape())?;
        if c != self.channels() {
            return Err(Error::Shape(format!(
                "batchnorm has {} channels, input {:?}",
                self.channels(),
                x.shape()
            )));
        }
        Ok((n, c, l))
    }

    fn normalize(&self, x: &Tensor, mean: &[f64], var: &[f64], batch_stats: bool) -> Result<(Tensor, BatchNormCache)> {
        let (n, c, l) = layout(x.shape())?;
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / libm::sqrt(v + self.eps)).collect();
        let mut xhat = vec![0.0; x.len()];
        let mut y = vec![0.0; x.len()];
        for ni in 0..n {
            for ci in 0..c {
                let (g, b) = (self.gamma.data()[ci], self.beta.data()[ci]);
                for k in (ni * c + ci) * l..(ni * c + ci + 1) * l {
                    let h = (x.data()[k] - mean[ci]) * inv_std[ci];
                    xhat[k] = h;
                    y[k] = g * h + b;
                }
            }
        }
        Ok((
            Tensor::new(x.shape().to_vec(), y)?,
            BatchNormCache {
                shape: x.shape().to_vec(),
                xhat,
                inv_std,
                batch_stats,
            },
        ))
    }

    /// Returns `(grad_x, grad_gamma, grad_beta)`.
    pub fn backward(&self, grad_out: &Tensor, cache: &BatchNormCache, need_input: bool) -> Result<(Option<Tensor>, Tensor, Tensor)> {
        if grad_out.shape() != cache.shape.as_slice() {
            return Err(Error::Shape("batchnorm grad does not match cached forward".into()));
        }
        let (n, c, l) = layout(&cache.shape)?;
        let g = grad_out.data();
        let mut ggamma = Tensor::zeros(&[c]);
        let mut gbeta = Tensor::zeros(&[c]);
        for ni in 0..n {
            for ci in 0..c {
                for k in (ni * c + ci) * l..(ni * c + ci + 1) * l {
                    ggamma.data_mut()[ci] += g[k] * cache.xhat[k];
                    gbeta.data_mut()[ci] += g[k];
                }
            }
        }
        if !need_input {
            return Ok((None, ggamma, gbeta));
        }
        let count = (n * l) as f64;
        let mut gx = vec![0.0; g.len()];
        for ni in 0..n {
            for ci in 0..c {
                let scale = self.gamma.data()[ci] * cache.inv_std[ci];
                let (mg, mgx) = (gbeta.data()[ci] / count, ggamma.data()[ci] / count);
                for k in (ni * c + ci) * l..(ni * c + ci + 1) * l {
                    gx[k] = if cache.batch_stats {
                        scale * (g[k] - mg - cache.xhat[k] * mgx)
                    } else {
                        scale * g[k]
                    };
                }
            }
        }
        Ok((Some(Tensor::new(cache.shape.clone(), gx)?), ggamma, gbeta))
    }
}
