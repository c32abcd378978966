//! 1-D convolution with "same" zero padding and its adjoint.
//!
//! Both layers work on `(N, C, L)` tensors. Internally the batch and time
//! axes are merged into one `N·L` axis (im2col), which turns every kernel
//! tap into a long `axpy`/`dot` over contiguous memory.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::tensor::{axpy, dot, Tensor};
use crate::{Error, Result};

/// `(N, C, L)` → `(C, N·L)`.
pub(crate) fn to_channel_major(x: &[f64], n: usize, c: usize, l: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for ni in 0..n {
        for ci in 0..c {
            let src = &x[(ni * c + ci) * l..(ni * c + ci + 1) * l];
            out[ci * n * l + ni * l..ci * n * l + (ni + 1) * l].copy_from_slice(src);
        }
    }
    out
}

/// `(C, N·L)` → `(N, C, L)`.
pub(crate) fn from_channel_major(x: &[f64], n: usize, c: usize, l: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for ci in 0..c {
        for ni in 0..n {
            let src = &x[ci * n * l + ni * l..ci * n * l + (ni + 1) * l];
            out[(ni * c + ci) * l..(ni * c + ci + 1) * l].copy_from_slice(src);
        }
    }
    out
}

/// Valid `t` range for tap offset `s` on a length-`l` signal; empty when
/// the tap never lands inside the signal.
#[inline]
fn tap_range(s: isize, l: usize) -> (usize, usize) {
    let lo = (-s).max(0) as usize;
    let hi = (l as isize - s).clamp(0, l as isize) as usize;
    (lo, hi.max(lo))
}

/// Row `(c·K + k)` holds `x[n, c, t + k - K/2]` (zero outside) at column `n·L + t`.
fn im2col(x: &[f64], n: usize, c: usize, l: usize, k: usize) -> Vec<f64> {
    let pad = (k / 2) as isize;
    let nl = n * l;
    let mut cols = vec![0.0; c * k * nl];
    for ci in 0..c {
        for kk in 0..k {
            let s = kk as isize - pad;
            let (lo, hi) = tap_range(s, l);
            if lo >= hi {
                continue;
            }
            let row = &mut cols[(ci * k + kk) * nl..(ci * k + kk + 1) * nl];
            for ni in 0..n {
                let src = &x[(ni * c + ci) * l..(ni * c + ci + 1) * l];
                let dst = &mut row[ni * l..(ni + 1) * l];
                dst[lo..hi].copy_from_slice(&src[(lo as isize + s) as usize..(hi as isize + s) as usize]);
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-adds columns back into `(N, C, L)`.
fn col2im(cols: &[f64], n: usize, c: usize, l: usize, k: usize) -> Vec<f64> {
    let pad = (k / 2) as isize;
    let nl = n * l;
    let mut x = vec![0.0; n * c * l];
    for ci in 0..c {
        for kk in 0..k {
            let s = kk as isize - pad;
            let (lo, hi) = tap_range(s, l);
            if lo >= hi {
                continue;
            }
            let row = &cols[(ci * k + kk) * nl..(ci * k + kk + 1) * nl];
            for ni in 0..n {
                let dst = &mut x[(ni * c + ci) * l..(ni * c + ci + 1) * l];
                let src = &row[ni * l..(ni + 1) * l];
                let d = &mut dst[(lo as isize + s) as usize..(hi as isize + s) as usize];
                for (a, b) in d.iter_mut().zip(&src[lo..hi]) {
                    *a += b;
                }
            }
        }
    }
    x
}

pub(crate) fn he_normal<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, slope: f64, rng: &mut R) -> Tensor {
    let std = libm::sqrt(2.0 / ((1.0 + slope * slope) * fan_in as f64));
    let normal = Normal::new(0.0, std).expect("finite std");
    let len = shape.iter().product();
    let data = (0..len).map(|_| normal.sample(rng)).collect();
    Tensor::new(shape.to_vec(), data).expect("length matches shape")
}

fn check_kernel(k: usize) -> Result<()> {
    if k % 2 == 1 {
        Ok(())
    } else {
        Err(Error::Config(format!("kernel size must be odd for same padding, got {k}")))
    }
}

/// `out[n,f,t] = b[f] + Σ_c Σ_k W[f,c,k]·x_pad[n,c,t+k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    /// `(filters, in_channels, kernel)`
    pub weight: Tensor,
    /// `(filters)`
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct Conv1dCache {
    cols: Vec<f64>,
    n: usize,
    l: usize,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(in_channels: usize, filters: usize, kernel: usize, slope: f64, rng: &mut R) -> Result<Conv1d> {
        check_kernel(kernel)?;
        Ok(Conv1d {
            weight: he_normal(&[filters, in_channels, kernel], in_channels * kernel, slope, rng),
            bias: Tensor::zeros(&[filters]),
        })
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Conv1d> {
        let (f, _, k) = weight.dims3()?;
        check_kernel(k)?;
        if bias.shape() != [f] {
            return Err(Error::Shape(format!("bias {:?} for {f} filters", bias.shape())));
        }
        Ok(Conv1d { weight, bias })
    }

    pub fn filters(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Conv1dCache)> {
        let (n, c, l) = x.dims3()?;
        if c != self.in_channels() {
            return Err(Error::Shape(format!(
                "conv1d expects {} input channels, got {c}",
                self.in_channels()
            )));
        }
        let (f, k) = (self.filters(), self.kernel());
        let ck = c * k;
        let nl = n * l;
        let cols = im2col(x.data(), n, c, l, k);
        let w = self.weight.data();
        let mut y = vec![0.0; f * nl];
        for fi in 0..f {
            let row = &mut y[fi * nl..(fi + 1) * nl];
            row.fill(self.bias.data()[fi]);
            for j in 0..ck {
                axpy(row, w[fi * ck + j], &cols[j * nl..(j + 1) * nl]);
            }
        }
        let out = Tensor::new(vec![n, f, l], from_channel_major(&y, n, f, l))?;
        Ok((out, Conv1dCache { cols, n, l }))
    }

    /// Returns `(grad_x, grad_W, grad_b)`; `grad_x` only when requested.
    pub fn backward(&self, grad_out: &Tensor, cache: &Conv1dCache, need_input: bool) -> Result<(Option<Tensor>, Tensor, Tensor)> {
        let (n, f, l) = grad_out.dims3()?;
        if (n, f, l) != (cache.n, self.filters(), cache.l) {
            return Err(Error::Shape(format!(
                "conv1d grad {:?} does not match cached forward ({}, {}, {})",
                grad_out.shape(),
                cache.n,
                self.filters(),
                cache.l
            )));
        }
        let (c, k) = (self.in_channels(), self.kernel());
        let ck = c * k;
        let nl = n * l;
        let g = to_channel_major(grad_out.data(), n, f, l);
        let w = self.weight.data();

        let mut gb = Tensor::zeros(&[f]);
        let mut gw = Tensor::zeros(self.weight.shape());
        for fi in 0..f {
            let grow = &g[fi * nl..(fi + 1) * nl];
            gb.data_mut()[fi] = grow.iter().sum();
            for j in 0..ck {
                gw.data_mut()[fi * ck + j] = dot(grow, &cache.cols[j * nl..(j + 1) * nl]);
            }
        }
        let gx = if need_input {
            let mut gcols = vec![0.0; ck * nl];
            for fi in 0..f {
                let grow = &g[fi * nl..(fi + 1) * nl];
                for j in 0..ck {
                    axpy(&mut gcols[j * nl..(j + 1) * nl], w[fi * ck + j], grow);
                }
            }
            Some(Tensor::new(vec![n, c, l], col2im(&gcols, n, c, l, k))?)
        } else {
            None
        };
        Ok((gx, gw, gb))
    }
}

/// Adjoint of [`Conv1d`] with the same padding: for zero bias,
/// `⟨conv(x), y⟩ = ⟨x, conv_transpose(y)⟩` when both share a weight tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose1d {
    /// `(in_channels, filters, kernel)`
    pub weight: Tensor,
    /// `(filters)`
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct ConvTranspose1dCache {
    x_cm: Vec<f64>,
    n: usize,
    l: usize,
}

impl ConvTranspose1d {
    pub fn new<R: Rng + ?Sized>(in_channels: usize, filters: usize, kernel: usize, slope: f64, rng: &mut R) -> Result<ConvTranspose1d> {
        check_kernel(kernel)?;
        Ok(ConvTranspose1d {
            weight: he_normal(&[in_channels, filters, kernel], in_channels * kernel, slope, rng),
            bias: Tensor::zeros(&[filters]),
        })
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<ConvTranspose1d> {
        let (_, f, k) = weight.dims3()?;
        check_kernel(k)?;
        if bias.shape() != [f] {
            return Err(Error::Shape(format!("bias {:?} for {f} filters", bias.shape())));
        }
        Ok(ConvTranspose1d { weight, bias })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn filters(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ConvTranspose1dCache)> {
        let (n, c, l) = x.dims3()?;
        if c != self.in_channels() {
            return Err(Error::Shape(format!(
                "conv_transpose1d expects {} input channels, got {c}",
                self.in_channels()
            )));
        }
        let (f, k) = (self.filters(), self.kernel());
        let fk = f * k;
        let nl = n * l;
        let x_cm = to_channel_major(x.data(), n, c, l);
        let w = self.weight.data();
        let mut z = vec![0.0; fk * nl];
        for ci in 0..c {
            let xrow = &x_cm[ci * nl..(ci + 1) * nl];
            for r in 0..fk {
                axpy(&mut z[r * nl..(r + 1) * nl], w[ci * fk + r], xrow);
            }
        }
        let mut y = col2im(&z, n, f, l, k);
        for ni in 0..n {
            for fi in 0..f {
                let b = self.bias.data()[fi];
                for v in &mut y[(ni * f + fi) * l..(ni * f + fi + 1) * l] {
                    *v += b;
                }
            }
        }
        Ok((Tensor::new(vec![n, f, l], y)?, ConvTranspose1dCache { x_cm, n, l }))
    }

    pub fn backward(
        &self,
        grad_out: &Tensor,
        cache: &ConvTranspose1dCache,
        need_input: bool,
    ) -> Result<(Option<Tensor>, Tensor, Tensor)> {
        let (n, f, l) = grad_out.dims3()?;
        if (n, f, l) != (cache.n, self.filters(), cache.l) {
            return Err(Error::Shape(format!(
                "conv_transpose1d grad {:?} does not match cached forward",
                grad_out.shape()
            )));
        }
        let (c, k) = (self.in_channels(), self.kernel());
        let fk = f * k;
        let nl = n * l;
        let gcols = im2col(grad_out.data(), n, f, l, k);
        let w = self.weight.data();

        let mut gb = Tensor::zeros(&[f]);
        for ni in 0..n {
            for fi in 0..f {
                gb.data_mut()[fi] += grad_out.data()[(ni * f + fi) * l..(ni * f + fi + 1) * l].iter().sum::<f64>();
            }
        }
        let mut gw = Tensor::zeros(self.weight.shape());
        for ci in 0..c {
            let xrow = &cache.x_cm[ci * nl..(ci + 1) * nl];
            for r in 0..fk {
                gw.data_mut()[ci * fk + r] = dot(xrow, &gcols[r * nl..(r + 1) * nl]);
            }
        }
        let gx = if need_input {
            let mut gx_cm = vec![0.0; c * nl];
            for ci in 0..c {
                let grow = &mut gx_cm[ci * nl..(ci + 1) * nl];
                for r in 0..fk {
                    axpy(grow, w[ci * fk + r], &gcols[r * nl..(r + 1) * nl]);
                }
            }
            Some(Tensor::new(vec![n, c, l], from_channel_major(&gx_cm, n, c, l))?)
        } else {
            None
        };
        Ok((gx, gw, gb))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let len = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).unwrap()
    }

    /// Direct sliding-window sum, independent of the im2col path.
    fn naive_conv(x: &Tensor, w: &Tensor, b: &Tensor) -> Vec<f64> {
        let (n, c, l) = x.dims3().unwrap();
        let (f, _, k) = w.dims3().unwrap();
        let pad = k / 2;
        let mut out = vec![0.0; n * f * l];
        for ni in 0..n {
            for fi in 0..f {
                for ti in 0..l {
                    let mut acc = b.data()[fi];
                    for ci in 0..c {
                        for kk in 0..k {
                            let src = ti + kk;
                            if src >= pad && src - pad < l {
                                acc += w.data()[(fi * c + ci) * k + kk] * x.data()[(ni * c + ci) * l + src - pad];
                            }
                        }
                    }
                    out[(ni * f + fi) * l + ti] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel() {
        let conv = Conv1d::from_parts(t(&[1, 1, 3], &[0.0, 1.0, 0.0]), t(&[1], &[0.0])).unwrap();
        let x = t(&[1, 1, 5], &[1.0, -2.0, 3.0, 4.0, 0.5]);
        assert_eq!(conv.forward(&x).unwrap().0.data(), x.data());
    }

    #[test]
    fn box_kernel_with_zero_pads() {
        let conv = Conv1d::from_parts(t(&[1, 1, 3], &[1.0, 1.0, 1.0]), t(&[1], &[0.0])).unwrap();
        let y = conv.forward(&t(&[1, 1, 3], &[1.0, 2.0, 3.0])).unwrap().0;
        assert_eq!(y.data(), &[3.0, 6.0, 5.0]);
    }

    #[test]
    fn bias_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut conv = Conv1d::new(2, 3, 5, 0.2, &mut rng).unwrap();
        conv.bias = Tensor::full(&[3], 0.7);
        let y = conv.forward(&Tensor::zeros(&[2, 2, 8])).unwrap().0;
        assert!(y.data().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn matches_naive_sliding_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let conv = Conv1d::from_parts(random(&[4, 3, 5], &mut rng), random(&[4], &mut rng)).unwrap();
        let x = random(&[2, 3, 7], &mut rng);
        let y = conv.forward(&x).unwrap().0;
        for (a, b) in y.data().iter().zip(naive_conv(&x, &conv.weight, &conv.bias)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let conv = Conv1d::new(2, 3, 3, 0.2, &mut rng).unwrap();
        assert!(conv.forward(&Tensor::zeros(&[1, 3, 4])).is_err());
        assert!(Conv1d::new(2, 3, 4, 0.2, &mut rng).is_err());
    }

    #[test]
    fn bias_gradient_counts_positions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let conv = Conv1d::new(2, 3, 3, 0.2, &mut rng).unwrap();
        let (y, cache) = conv.forward(&random(&[4, 2, 9], &mut rng)).unwrap();
        let (_, _, gb) = conv.backward(&Tensor::full(y.shape(), 1.0), &cache, true).unwrap();
        assert!(gb.data().iter().all(|&g| g == 36.0));
        let (gx, gw, gb) = conv.backward(&Tensor::zeros(y.shape()), &cache, true).unwrap();
        assert!(gx.unwrap().data().iter().chain(gw.data()).chain(gb.data()).all(|&g| g == 0.0));
        assert!(conv.backward(&Tensor::zeros(&[4, 3, 8]), &cache, true).is_err());
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (c, f, k, l) in [(3, 4, 5, 16), (2, 2, 3, 7), (1, 5, 1, 4)] {
            let w = random(&[f, c, k], &mut rng);
            let conv = Conv1d::from_parts(w.clone(), Tensor::zeros(&[f])).unwrap();
            let convt = ConvTranspose1d::from_parts(w, Tensor::zeros(&[c])).unwrap();
            let x = random(&[3, c, l], &mut rng);
            let y = random(&[3, f, l], &mut rng);
            let lhs = conv.forward(&x).unwrap().0.inner(&y);
            let rhs = x.inner(&convt.forward(&y).unwrap().0);
            assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
        }
    }
}
