use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use super::activation::{Dropout, LeakyRelu};
use super::batchnorm::{BatchNorm, BatchNormCache};
use super::conv::{Conv1d, Conv1dCache, ConvTranspose1d, ConvTranspose1dCache};
use super::dense::{Dense, DenseCache};
use super::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active, batch statistics.
    Train,
    /// Dropout off, running statistics.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv1d(Conv1d),
    ConvTranspose1d(ConvTranspose1d),
    Dense(Dense),
    LeakyRelu(LeakyRelu),
    BatchNorm(BatchNorm),
    Dropout(Dropout),
    /// Reshapes everything after the batch axis.
    Reshape(Vec<usize>),
}

#[derive(Debug, Clone)]
pub enum LayerCache {
    Conv1d(Conv1dCache),
    ConvTranspose1d(ConvTranspose1dCache),
    Dense(DenseCache),
    LeakyRelu(Vec<bool>),
    BatchNorm(BatchNormCache),
    Dropout(Option<Vec<f64>>),
    Reshape(Vec<usize>),
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv1d(_) => "conv1d",
            Layer::ConvTranspose1d(_) => "conv_transpose1d",
            Layer::Dense(_) => "dense",
            Layer::LeakyRelu(_) => "leaky_relu",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Dropout(_) => "dropout",
            Layer::Reshape(_) => "reshape",
        }
    }

    /// Trainable tensors with their local names.
    pub fn params(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            Layer::Conv1d(l) => vec![("weight", &l.weight), ("bias", &l.bias)],
            Layer::ConvTranspose1d(l) => vec![("weight", &l.weight), ("bias", &l.bias)],
            Layer::Dense(l) => vec![("weight", &l.weight), ("bias", &l.bias)],
            Layer::BatchNorm(l) => vec![("gamma", &l.gamma), ("beta", &l.beta)],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv1d(l) => vec![&mut l.weight, &mut l.bias],
            Layer::ConvTranspose1d(l) => vec![&mut l.weight, &mut l.bias],
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            Layer::BatchNorm(l) => vec![&mut l.gamma, &mut l.beta],
            _ => Vec::new(),
        }
    }

    /// Non-trainable state that still has to be checkpointed.
    pub fn buffers(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            Layer::BatchNorm(l) => vec![("running_mean", &l.running_mean), ("running_var", &l.running_var)],
            _ => Vec::new(),
        }
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::BatchNorm(l) => vec![&mut l.running_mean, &mut l.running_var],
            _ => Vec::new(),
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode, rng: &mut ChaCha8Rng) -> Result<(Tensor, LayerCache)> {
        match (self, mode) {
            (Layer::BatchNorm(l), Mode::Train) => {
                let (y, c) = l.forward(x, true)?;
                Ok((y, LayerCache::BatchNorm(c)))
            }
            (Layer::Dropout(l), Mode::Train) => {
                let (y, c) = l.forward(x, true, rng);
                Ok((y, LayerCache::Dropout(c)))
            }
            (layer, _) => layer.forward_eval(x),
        }
    }

    /// Evaluation-mode forward; does not touch the layer.
    pub fn forward_eval(&self, x: &Tensor) -> Result<(Tensor, LayerCache)> {
        Ok(match self {
            Layer::Conv1d(l) => {
                let (y, c) = l.forward(x)?;
                (y, LayerCache::Conv1d(c))
            }
            Layer::ConvTranspose1d(l) => {
                let (y, c) = l.forward(x)?;
                (y, LayerCache::ConvTranspose1d(c))
            }
            Layer::Dense(l) => {
                let (y, c) = l.forward(x)?;
                (y, LayerCache::Dense(c))
            }
            Layer::LeakyRelu(l) => {
                let (y, c) = l.forward(x);
                (y, LayerCache::LeakyRelu(c))
            }
            Layer::BatchNorm(l) => {
                let (y, c) = l.forward_eval(x)?;
                (y, LayerCache::BatchNorm(c))
            }
            Layer::Dropout(_) => (x.clone(), LayerCache::Dropout(None)),
            Layer::Reshape(dims) => {
                let n = x.shape().first().copied().unwrap_or(0);
                let mut shape = vec![n];
                shape.extend_from_slice(dims);
                (x.clone().reshape(shape)?, LayerCache::Reshape(x.shape().to_vec()))
            }
        })
    }

    /// Returns the input gradient (when requested) and one gradient per
    /// entry of [`Layer::params`].
    pub fn backward(&self, grad_out: &Tensor, cache: &LayerCache, need_input: bool) -> Result<(Option<Tensor>, Vec<Tensor>)> {
        let mismatch = || Error::Shape(format!("{} backward given a cache from another layer", self.kind()));
        Ok(match (self, cache) {
            (Layer::Conv1d(l), LayerCache::Conv1d(c)) => {
                let (gx, gw, gb) = l.backward(grad_out, c, need_input)?;
                (gx, vec![gw, gb])
            }
            (Layer::ConvTranspose1d(l), LayerCache::ConvTranspose1d(c)) => {
                let (gx, gw, gb) = l.backward(grad_out, c, need_input)?;
                (gx, vec![gw, gb])
            }
            (Layer::Dense(l), LayerCache::Dense(c)) => {
                let (gx, gw, gb) = l.backward(grad_out, c, need_input)?;
                (gx, vec![gw, gb])
            }
            (Layer::BatchNorm(l), LayerCache::BatchNorm(c)) => {
                let (gx, gg, gb) = l.backward(grad_out, c, need_input)?;
                (gx, vec![gg, gb])
            }
            (Layer::LeakyRelu(l), LayerCache::LeakyRelu(mask)) => (Some(l.backward(grad_out, mask)?), Vec::new()),
            (Layer::Dropout(l), LayerCache::Dropout(scale)) => (Some(l.backward(grad_out, scale.as_deref())?), Vec::new()),
            (Layer::Reshape(_), LayerCache::Reshape(shape)) => (Some(grad_out.clone().reshape(shape.clone())?), Vec::new()),
            _ => return Err(mismatch()),
        })
    }
}

/// An ordered stack of layers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Sequential {
        Sequential { layers }
    }

    /// `(qualified name, tensor)` for every trainable tensor, in a fixed order.
    pub fn named_params(&self, prefix: &str) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (k, layer) in self.layers.iter().enumerate() {
            for (name, t) in layer.params() {
                out.push((format!("{prefix}.{k}.{}.{name}", layer.kind()), t));
            }
        }
        out
    }

    pub fn named_buffers(&self, prefix: &str) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (k, layer) in self.layers.iter().enumerate() {
            for (name, t) in layer.buffers() {
                out.push((format!("{prefix}.{k}.{}.{name}", layer.kind()), t));
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(Layer::buffers_mut).collect()
    }

    /// Mask over [`Sequential::named_params`]: `true` for weight tensors of
    /// conv/dense layers, which carry the L2 penalty.
    pub fn weight_mask(&self) -> Vec<bool> {
        self.layers
            .iter()
            .flat_map(|l| {
                let is_affine = matches!(l, Layer::Conv1d(_) | Layer::ConvTranspose1d(_) | Layer::Dense(_));
                l.params().into_iter().map(move |(name, _)| is_affine && name == "weight")
            })
            .collect()
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode, rng: &mut ChaCha8Rng) -> Result<(Tensor, Vec<LayerCache>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (k, layer) in self.layers.iter_mut().enumerate() {
            let (y, c) = layer.forward(&h, mode, rng)?;
            y.check_finite(&format!("output of layer {k} ({})", layer.kind()))?;
            caches.push(c);
            h = y;
        }
        Ok((h, caches))
    }

    pub fn forward_eval(&self, x: &Tensor) -> Result<(Tensor, Vec<LayerCache>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            let (y, c) = layer.forward_eval(&h)?;
            y.check_finite(&format!("output of layer {k} ({})", layer.kind()))?;
            caches.push(c);
            h = y;
        }
        Ok((h, caches))
    }

    /// Backpropagates through every layer. Parameter gradients come back in
    /// [`Sequential::named_params`] order.
    pub fn backward(&self, grad_out: &Tensor, caches: &[LayerCache], need_input: bool) -> Result<(Option<Tensor>, Vec<Tensor>)> {
        if caches.len() != self.layers.len() {
            return Err(Error::Shape("cache count does not match layer count".into()));
        }
        let mut per_layer: Vec<Vec<Tensor>> = vec![Vec::new(); self.layers.len()];
        let mut g = grad_out.clone();
        let mut input_grad = None;
        for k in (0..self.layers.len()).rev() {
            let need = k > 0 || need_input;
            let (gx, grads) = self.layers[k].backward(&g, &caches[k], need)?;
            per_layer[k] = grads;
            match gx {
                Some(gx) if k > 0 => g = gx,
                gx => input_grad = gx,
            }
        }
        Ok((input_grad, per_layer.into_iter().flatten().collect()))
    }
}
