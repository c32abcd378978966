use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::conv::he_normal;
use super::tensor::{axpy, dot, Tensor};
use crate::{Error, Result};

/// Fully connected layer, `y = x·Wᵀ + b`. Inputs of rank > 2 are flattened
/// after the batch axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `(out, in)`
    pub weight: Tensor,
    /// `(out)`
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    x: Vec<f64>,
    in_shape: Vec<usize>,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, slope: f64, rng: &mut R) -> Dense {
        Dense {
            weight: he_normal(&[outputs, inputs], inputs, slope, rng),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Dense> {
        match (weight.shape(), bias.shape()) {
            ([o, _], [b]) if o == b => Ok(Dense { weight, bias }),
            (w, b) => Err(Error::Shape(format!("dense weight {w:?} with bias {b:?}"))),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, DenseCache)> {
        let n = *x.shape().first().ok_or_else(|| Error::Shape("dense input has rank 0".into()))?;
        let features = if n == 0 { 0 } else { x.len() / n };
        let (inp, out) = (self.inputs(), self.outputs());
        if features != inp {
            return Err(Error::Shape(format!(
                "dense expects {inp} features, got {:?}",
                x.shape()
            )));
        }
        let w = self.weight.data();
        let mut y = vec![0.0; n * out];
        for ni in 0..n {
            let xrow = &x.data()[ni * inp..(ni + 1) * inp];
            for o in 0..out {
                y[ni * out + o] = self.bias.data()[o] + dot(xrow, &w[o * inp..(o + 1) * inp]);
            }
        }
        Ok((
            Tensor::new(vec![n, out], y)?,
            DenseCache {
                x: x.data().to_vec(),
                in_shape: x.shape().to_vec(),
            },
        ))
    }

    pub fn backward(&self, grad_out: &Tensor, cache: &DenseCache, need_input: bool) -> Result<(Option<Tensor>, Tensor, Tensor)> {
        let (inp, out) = (self.inputs(), self.outputs());
        let n = cache.in_shape[0];
        if grad_out.shape() != [n, out] {
            return Err(Error::Shape(format!(
                "dense grad {:?}, expected [{n}, {out}]",
                grad_out.shape()
            )));
        }
        let g = grad_out.data();
        let w = self.weight.data();
        let mut gw = Tensor::zeros(self.weight.shape());
        let mut gb = Tensor::zeros(&[out]);
        for ni in 0..n {
            let xrow = &cache.x[ni * inp..(ni + 1) * inp];
            for o in 0..out {
                let go = g[ni * out + o];
                gb.data_mut()[o] += go;
                axpy(&mut gw.data_mut()[o * inp..(o + 1) * inp], go, xrow);
            }
        }
        let gx = if need_input {
            let mut gx = vec![0.0; n * inp];
            for ni in 0..n {
                let row = &mut gx[ni * inp..(ni + 1) * inp];
                for o in 0..out {
                    axpy(row, g[ni * out + o], &w[o * inp..(o + 1) * inp]);
                }
            }
            Some(Tensor::new(cache.in_shape.clone(), gx)?)
        } else {
            None
        };
        Ok((gx, gw, gb))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_by_hand() {
        let d = Dense::from_parts(
            Tensor::new(vec![2, 3], vec![1.0, 0.0, -1.0, 0.5, 0.5, 0.5]).unwrap(),
            Tensor::new(vec![2], vec![0.1, -0.1]).unwrap(),
        )
        .unwrap();
        let (y, _) = d.forward(&Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        assert!((y.data()[0] - -1.9).abs() < 1e-15);
        assert!((y.data()[1] - 2.9).abs() < 1e-15);
    }

    #[test]
    fn flattens_trailing_axes() {
        let d = Dense::from_parts(Tensor::full(&[1, 6], 1.0), Tensor::zeros(&[1])).unwrap();
        let (y, cache) = d.forward(&Tensor::full(&[2, 3, 2], 1.0)).unwrap();
        assert_eq!(y.data(), &[6.0, 6.0]);
        let (gx, _, _) = d.backward(&Tensor::full(&[2, 1], 1.0), &cache, true).unwrap();
        assert_eq!(gx.unwrap().shape(), &[2, 3, 2]);
        assert!(d.forward(&Tensor::zeros(&[2, 5])).is_err());
    }
}
