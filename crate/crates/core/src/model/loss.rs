//! Data and physics loss terms and their gradients with respect to the
//! normalized reconstruction.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::network::PiConvAe;
use crate::neural::Tensor;
use crate::telemetry::{Channel, MinMax, CHANNELS};
use crate::{Error, Result};

const V: usize = Channel::V as usize;
const I: usize = Channel::I as usize;
const TH: usize = Channel::Theta as usize;
const DL: usize = Channel::Delta as usize;
const P: usize = Channel::P as usize;
const Q: usize = Channel::Q as usize;

/// Per-term values of the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    /// Mean squared reconstruction error.
    pub recon: f64,
    /// `λ·‖W‖²`.
    pub reg: f64,
    /// `recon + reg`.
    pub ae: f64,
    pub phy_p: f64,
    pub phy_q: f64,
    /// `α_d·ae + α_phy·(phy_p + phy_q)`, or just `α_d·ae` for the baseline.
    pub total: f64,
}

impl LossBreakdown {
    pub(crate) fn scaled(&self, k: f64) -> LossBreakdown {
        LossBreakdown {
            recon: self.recon * k,
            reg: self.reg * k,
            ae: self.ae * k,
            phy_p: self.phy_p * k,
            phy_q: self.phy_q * k,
            total: self.total * k,
        }
    }

    pub(crate) fn add(&mut self, o: &LossBreakdown) {
        self.recon += o.recon;
        self.reg += o.reg;
        self.ae += o.ae;
        self.phy_p += o.phy_p;
        self.phy_q += o.phy_q;
        self.total += o.total;
    }
}

fn check_pair(x: &Tensor, xhat: &Tensor) -> Result<()> {
    if x.shape() != xhat.shape() {
        return Err(Error::Shape(format!(
            "target {:?} vs reconstruction {:?}",
            x.shape(),
            xhat.shape()
        )));
    }
    Ok(())
}

/// Mean over all elements of `(x̂ - x)²`.
pub fn mean_squared_error(x: &Tensor, xhat: &Tensor) -> Result<f64> {
    check_pair(x, xhat)?;
    if x.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = x.data().iter().zip(xhat.data()).map(|(a, b)| (b - a) * (b - a)).sum();
    Ok(sum / x.len() as f64)
}

/// Mean squared error plus `λ·Σ‖W‖²` over `weights`.
pub fn reconstruction_loss<'a>(x: &Tensor, xhat: &Tensor, lambda: f64, weights: impl IntoIterator<Item = &'a Tensor>) -> Result<f64> {
    let reg: f64 = weights.into_iter().map(Tensor::sum_squares).sum();
    Ok(mean_squared_error(x, xhat)? + lambda * reg)
}

/// Autoencoder loss of the model's own weights.
pub fn loss_ae(x: &Tensor, xhat: &Tensor, model: &PiConvAe) -> Result<f64> {
    reconstruction_loss(x, xhat, model.config.lambda_reg, model.weights())
}

/// Squared active/reactive power residuals of a denormalized reconstruction,
/// each averaged over all `(sample, timestep)` positions.
///
/// `xhat` is normalized with rows of six channels in its last axis.
pub fn physics_losses(xhat: &Tensor, minmax: &MinMax) -> Result<(f64, f64)> {
    let (lp, lq, _) = physics_terms(xhat, minmax, false)?;
    Ok((lp, lq))
}

pub fn loss_physics(xhat: &Tensor, model: &PiConvAe) -> Result<(f64, f64)> {
    physics_losses(xhat, model.minmax.as_ref().ok_or(Error::Unfitted)?)
}

/// Returns `(L_P, L_Q, dL_P/dx̂ + dL_Q/dx̂)`; the gradient is empty unless requested.
fn physics_terms(xhat: &Tensor, mm: &MinMax, grad: bool) -> Result<(f64, f64, Vec<f64>)> {
    if xhat.shape().last() != Some(&CHANNELS) {
        return Err(Error::Shape(format!("physics loss expects rows of 6 channels, got {:?}", xhat.shape())));
    }
    let positions = xhat.len() / CHANNELS;
    if positions == 0 {
        return Ok((0.0, 0.0, Vec::new()));
    }
    let m = positions as f64;
    let mut g = if grad { vec![0.0; xhat.len()] } else { Vec::new() };
    let (mut lp, mut lq) = (0.0, 0.0);
    for (k, row) in xhat.data().chunks_exact(CHANNELS).enumerate() {
        let z: [f64; CHANNELS] = core::array::from_fn(|c| mm.invert(c, row[c]));
        let phi = z[TH] - z[DL];
        let (cs, sn) = (libm::cos(phi), libm::sin(phi));
        let vi = z[V] * z[I];
        let rp = z[P] - vi * cs;
        let rq = z[Q] - vi * sn;
        lp += rp * rp;
        lq += rq * rq;
        if grad {
            let (a, b) = (2.0 * rp / m, 2.0 * rq / m);
            // derivatives in physical units, then chained through the affine denormalization
            let dz = [
                -a * z[I] * cs - b * z[I] * sn,
                -a * z[V] * cs - b * z[V] * sn,
                a * vi * sn - b * vi * cs,
                -a * vi * sn + b * vi * cs,
                a,
                b,
            ];
            for c in 0..CHANNELS {
                g[k * CHANNELS + c] = dz[c] * mm.span(c);
            }
        }
    }
    Ok((lp / m, lq / m, g))
}

/// The full objective and its gradient with respect to `xhat`.
///
/// The L2 term's parameter gradient is not included here; the trainer adds it.
pub fn loss_total_with_grad(x: &Tensor, xhat: &Tensor, model: &PiConvAe) -> Result<(LossBreakdown, Tensor)> {
    let (b, g) = total(x, xhat, model, true)?;
    Ok((b, g.expect("gradient requested")))
}

pub fn loss_total(x: &Tensor, xhat: &Tensor, model: &PiConvAe) -> Result<LossBreakdown> {
    Ok(total(x, xhat, model, false)?.0)
}

fn total(x: &Tensor, xhat: &Tensor, model: &PiConvAe, grad: bool) -> Result<(LossBreakdown, Option<Tensor>)> {
    let cfg = &model.config;
    let recon = mean_squared_error(x, xhat)?;
    let reg = cfg.lambda_reg * model.weights().into_iter().map(Tensor::sum_squares).sum::<f64>();
    let ae = recon + reg;
    let mut out = LossBreakdown {
        recon,
        reg,
        ae,
        total: cfg.alpha_d * ae,
        ..LossBreakdown::default()
    };
    let mut g = if grad {
        let k = cfg.alpha_d * 2.0 / x.len().max(1) as f64;
        let data = x.data().iter().zip(xhat.data()).map(|(a, b)| k * (b - a)).collect();
        Some(Tensor::new(xhat.shape().to_vec(), data)?)
    } else {
        None
    };
    if cfg.physics_enabled && cfg.alpha_phy != 0.0 {
        let mm = model.minmax.as_ref().ok_or(Error::Unfitted)?;
        let (lp, lq, pg) = physics_terms(xhat, mm, grad)?;
        out.phy_p = lp;
        out.phy_q = lq;
        out.total += cfg.alpha_phy * (lp + lq);
        if let Some(g) = g.as_mut() {
            for (gi, pi) in g.data_mut().iter_mut().zip(pg) {
                *gi += cfg.alpha_phy * pi;
            }
        }
    } else if cfg.physics_enabled {
        // weight zero: report the terms without letting them touch the total
        if let Some(mm) = model.minmax.as_ref() {
            let (lp, lq, _) = physics_terms(xhat, mm, false)?;
            out.phy_p = lp;
            out.phy_q = lq;
        }
    }
    if !out.total.is_finite() {
        return Err(Error::NonFinite(format!("loss {out:?}")));
    }
    Ok((out, g))
}
