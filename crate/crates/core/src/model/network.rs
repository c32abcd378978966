use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::neural::{
    BatchNorm, Conv1d, ConvTranspose1d, Dense, Dropout, Layer, LayerCache, LeakyRelu, LrSchedule, Mode, OptimizerState,
    Sequential, Tensor,
};
use crate::telemetry::MinMax;
use crate::{Error, Result};

/// The convolutional autoencoder.
///
/// Encoder: `Conv(F1,K1) → Conv(F2,K2) → Dense(bottleneck)`.
/// Decoder: `Dense(F2·W) → ConvT(F2,K2) → ConvT(F1,K1) → pointwise head (6)`.
/// Every hidden layer is followed by batchnorm and LeakyReLU; the conv
/// layers additionally by dropout. The head is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct PiConvAe {
    pub config: ModelConfig,
    pub encoder: Sequential,
    pub decoder: Sequential,
    /// MinMax constants of the training data; required by the physics loss.
    pub minmax: Option<MinMax>,
    pub encoder_opt: OptimizerState,
    pub decoder_opt: OptimizerState,
    /// Completed training epochs.
    pub epoch: usize,
}

/// Caches from one forward pass.
pub struct ForwardPass {
    pub output: Tensor,
    enc: Vec<LayerCache>,
    dec: Vec<LayerCache>,
}

/// `(N, A, B)` → `(N, B, A)`.
pub(crate) fn swap_last_axes(data: &[f64], n: usize, a: usize, b: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for ni in 0..n {
        let base = ni * a * b;
        for i in 0..a {
            for j in 0..b {
                out[base + j * a + i] = data[base + i * b + j];
            }
        }
    }
    out
}

impl PiConvAe {
    pub fn new(config: ModelConfig) -> Result<PiConvAe> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let s = config.leaky_slope;
        let [f1, f2] = config.enc_filters;
        let [k1, k2] = config.enc_kernels;
        let (w, c, b) = (config.window, config.channels, config.bottleneck);
        let act = || Layer::LeakyRelu(LeakyRelu { slope: s });
        let drop = Dropout::new(config.dropout)?;

        let encoder = Sequential::new(vec![
            Layer::Conv1d(Conv1d::new(c, f1, k1, s, &mut rng)?),
            Layer::BatchNorm(BatchNorm::new(f1)),
            act(),
            Layer::Dropout(drop),
            Layer::Conv1d(Conv1d::new(f1, f2, k2, s, &mut rng)?),
            Layer::BatchNorm(BatchNorm::new(f2)),
            act(),
            Layer::Dropout(drop),
            Layer::Dense(Dense::new(f2 * w, b, s, &mut rng)),
            Layer::BatchNorm(BatchNorm::new(b)),
            act(),
        ]);
        let decoder = Sequential::new(vec![
            Layer::Dense(Dense::new(b, f2 * w, s, &mut rng)),
            Layer::BatchNorm(BatchNorm::new(f2 * w)),
            act(),
            Layer::Reshape(vec![f2, w]),
            Layer::ConvTranspose1d(ConvTranspose1d::new(f2, f2, k2, s, &mut rng)?),
            Layer::BatchNorm(BatchNorm::new(f2)),
            act(),
            Layer::Dropout(drop),
            Layer::ConvTranspose1d(ConvTranspose1d::new(f2, f1, k1, s, &mut rng)?),
            Layer::BatchNorm(BatchNorm::new(f1)),
            act(),
            Layer::Dropout(drop),
            // linear output head, one dense map per timestep
            Layer::Conv1d(Conv1d::new(f1, c, 1, 1.0, &mut rng)?),
        ]);
        let encoder_opt = OptimizerState::new(encoder.named_params("").into_iter().map(|(_, t)| t), config.lr);
        let decoder_opt = OptimizerState::new(decoder.named_params("").into_iter().map(|(_, t)| t), config.lr);
        Ok(PiConvAe {
            config,
            encoder,
            decoder,
            minmax: None,
            encoder_opt,
            decoder_opt,
            epoch: 0,
        })
    }

    pub fn with_minmax(mut self, minmax: MinMax) -> Result<PiConvAe> {
        minmax.validate()?;
        self.minmax = Some(minmax);
        Ok(self)
    }

    pub fn encoder_param_names(&self) -> Vec<String> {
        self.encoder.named_params("enc").into_iter().map(|(n, _)| n).collect()
    }

    pub fn decoder_param_names(&self) -> Vec<String> {
        self.decoder.named_params("dec").into_iter().map(|(n, _)| n).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.encoder
            .named_params("")
            .iter()
            .chain(self.decoder.named_params("").iter())
            .map(|(_, t)| t.len())
            .sum()
    }

    /// Weight tensors of conv/dense layers (the L2-penalized set).
    pub fn weights(&self) -> Vec<&Tensor> {
        let pick = |s: &'_ Sequential| -> Vec<usize> {
            s.weight_mask().iter().enumerate().filter(|(_, &m)| m).map(|(k, _)| k).collect()
        };
        let enc = self.encoder.named_params("");
        let dec = self.decoder.named_params("");
        let mut out: Vec<&Tensor> = pick(&self.encoder).into_iter().map(|k| enc[k].1).collect();
        out.extend(pick(&self.decoder).into_iter().map(|k| dec[k].1));
        out
    }

    fn input_tensor(&self, batch: &Tensor) -> Result<Tensor> {
        let (n, w, c) = batch.dims3()?;
        if c != self.config.channels || w != self.config.window {
            return Err(Error::Shape(format!(
                "model expects (N, {}, {}), got {:?}",
                self.config.window,
                self.config.channels,
                batch.shape()
            )));
        }
        Tensor::new(vec![n, c, w], swap_last_axes(batch.data(), n, w, c))
    }

    fn output_tensor(&self, y: &Tensor) -> Result<Tensor> {
        let (n, c, w) = y.dims3()?;
        Tensor::new(vec![n, w, c], swap_last_axes(y.data(), n, c, w))
    }

    /// Reconstructs a normalized batch `(N, window, 6)`.
    pub fn forward(&mut self, batch: &Tensor, mode: Mode, rng: &mut ChaCha8Rng) -> Result<ForwardPass> {
        let x = self.input_tensor(batch)?;
        let (z, enc) = self.encoder.forward(&x, mode, rng)?;
        let (y, dec) = self.decoder.forward(&z, mode, rng)?;
        Ok(ForwardPass {
            output: self.output_tensor(&y)?,
            enc,
            dec,
        })
    }

    /// Evaluation-mode forward pass that keeps caches (for gradients with
    /// frozen batchnorm statistics).
    pub fn forward_eval_pass(&self, batch: &Tensor) -> Result<ForwardPass> {
        let x = self.input_tensor(batch)?;
        let (z, enc) = self.encoder.forward_eval(&x)?;
        let (y, dec) = self.decoder.forward_eval(&z)?;
        Ok(ForwardPass {
            output: self.output_tensor(&y)?,
            enc,
            dec,
        })
    }

    /// Evaluation-mode reconstruction; the model is not modified.
    pub fn reconstruct(&self, batch: &Tensor) -> Result<Tensor> {
        Ok(self.forward_eval_pass(batch)?.output)
    }

    /// Backpropagates `dL/dx̂` (shape of the output). Returns encoder and
    /// decoder parameter gradients; the encoder pass is skipped when
    /// `with_encoder` is false.
    pub fn backward(&self, pass: &ForwardPass, grad_out: &Tensor, with_encoder: bool) -> Result<(Option<Vec<Tensor>>, Vec<Tensor>)> {
        let (n, w, c) = grad_out.dims3()?;
        let g = Tensor::new(vec![n, c, w], swap_last_axes(grad_out.data(), n, w, c))?;
        let (gz, dec) = self.decoder.backward(&g, &pass.dec, with_encoder)?;
        let enc = match gz {
            Some(gz) => Some(self.encoder.backward(&gz, &pass.enc, false)?.1),
            None => None,
        };
        Ok((enc, dec))
    }

    /// Adds the L2 gradient `2·scale·λ·W` to the weight entries of `grads`.
    pub(crate) fn add_l2_grads(&self, enc: Option<&mut [Tensor]>, dec: &mut [Tensor], scale: f64) {
        let k = 2.0 * scale * self.config.lambda_reg;
        if k == 0.0 {
            return;
        }
        let apply = |seq: &Sequential, grads: &mut [Tensor]| {
            for ((mask, (_, w)), g) in seq.weight_mask().into_iter().zip(seq.named_params("")).zip(grads.iter_mut()) {
                if mask {
                    g.data_mut()
                        .iter_mut()
                        .zip(w.data())
                        .for_each(|(gi, wi)| *gi += k * wi);
                }
            }
        };
        if let Some(enc) = enc {
            apply(&self.encoder, enc);
        }
        apply(&self.decoder, dec);
    }

    /// Resets the learning-rate schedules and moments (fresh training run).
    pub fn reset_optimizers(&mut self, schedule: LrSchedule) {
        self.encoder_opt = OptimizerState::new(self.encoder.named_params("").into_iter().map(|(_, t)| t), schedule);
        self.decoder_opt = OptimizerState::new(self.decoder.named_params("").into_iter().map(|(_, t)| t), schedule);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_axes_round_trip() {
        let d: Vec<f64> = (0..24).map(|v| v as f64).collect();
        let s = swap_last_axes(&d, 2, 3, 4);
        assert_eq!(s[1], d[4]);
        assert_eq!(swap_last_axes(&s, 2, 4, 3), d);
    }

    #[test]
    fn output_shape_matches_input() {
        let mut m = PiConvAe::new(ModelConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::full(&[3, 16, 6], 0.5);
        // no running statistics yet
        assert!(m.reconstruct(&x).is_err());
        let y = m.forward(&x, Mode::Train, &mut rng).unwrap().output;
        assert_eq!(y.shape(), &[3, 16, 6]);
        assert!(y.data().iter().all(|v| v.is_finite()));
        let a = m.reconstruct(&x).unwrap();
        let b = m.reconstruct(&x).unwrap();
        assert_eq!(a, b);
        assert!(m.reconstruct(&Tensor::zeros(&[1, 16, 5])).is_err());
    }
}
