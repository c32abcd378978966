//! Central finite-difference check of analytic gradients.

use alloc::string::String;
use alloc::vec::Vec;

use super::tensor::Tensor;
use crate::Result;

/// Step used for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Gradients smaller than this are compared on an absolute scale.
const SCALE_FLOOR: f64 = 1e-4;

/// Something with a scalar loss over named parameter blocks.
pub trait Differentiable {
    fn block_count(&self) -> usize;
    fn block_name(&self, k: usize) -> String;
    fn block_mut(&mut self, k: usize) -> &mut Tensor;
    fn loss(&mut self) -> Result<f64>;
    /// Loss and one gradient per block.
    fn loss_and_grads(&mut self) -> Result<(f64, Vec<Tensor>)>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockError {
    pub name: String,
    pub max_rel_err: f64,
    pub checked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub blocks: Vec<BlockError>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.failing().is_empty()
    }

    /// Names of blocks whose error exceeds the tolerance.
    pub fn failing(&self) -> Vec<&str> {
        self.blocks
            .iter()
            .filter(|b| !(b.max_rel_err < self.tolerance))
            .map(|b| b.name.as_str())
            .collect()
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(SCALE_FLOOR);
    (analytic - numeric).abs() / scale
}

/// Compares every entry of every block (or the first `max_per_block`
/// entries, if given) against `(L(w+h) - L(w-h)) / 2h`.
pub fn grad_check<D: Differentiable + ?Sized>(model: &mut D, tolerance: f64, max_per_block: Option<usize>) -> Result<GradCheckReport> {
    grad_check_with_step(model, tolerance, max_per_block, FD_STEP)
}

/// [`grad_check`] with an explicit step `h`.
pub fn grad_check_with_step<D: Differentiable + ?Sized>(
    model: &mut D,
    tolerance: f64,
    max_per_block: Option<usize>,
    h: f64,
) -> Result<GradCheckReport> {
    let (_, analytic) = model.loss_and_grads()?;
    let mut blocks = Vec::with_capacity(model.block_count());
    for (k, grad) in analytic.iter().enumerate().take(model.block_count()) {
        let n = max_per_block.map_or(grad.len(), |m| m.min(grad.len()));
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let orig = model.block_mut(k).data()[i];
            model.block_mut(k).data_mut()[i] = orig + h;
            let plus = model.loss()?;
            model.block_mut(k).data_mut()[i] = orig - h;
            let minus = model.loss()?;
            model.block_mut(k).data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let e = relative_error(grad.data()[i], numeric);
            worst = if e.is_nan() { f64::INFINITY } else { worst.max(e) };
        }
        blocks.push(BlockError {
            name: model.block_name(k),
            max_rel_err: worst,
            checked: n,
        });
    }
    Ok(GradCheckReport { tolerance, blocks })
}
