use alloc::string::String;
use alloc::vec::Vec;

use super::loss::{loss_total, loss_total_with_grad};
use super::network::PiConvAe;
use crate::neural::{Differentiable, Tensor};
use crate::Result;

/// The training objective on a fixed batch with frozen batchnorm statistics
/// and dropout off, exposed for finite-difference checks.
pub struct FrozenObjective<'a> {
    pub model: &'a mut PiConvAe,
    pub batch: Tensor,
    names: Vec<String>,
}

impl<'a> FrozenObjective<'a> {
    pub fn new(model: &'a mut PiConvAe, batch: Tensor) -> FrozenObjective<'a> {
        let mut names = model.encoder_param_names();
        names.extend(model.decoder_param_names());
        FrozenObjective { model, batch, names }
    }

    fn encoder_blocks(&self) -> usize {
        self.model.encoder.named_params("").len()
    }
}

impl Differentiable for FrozenObjective<'_> {
    fn block_count(&self) -> usize {
        self.names.len()
    }

    fn block_name(&self, k: usize) -> String {
        self.names[k].clone()
    }

    fn block_mut(&mut self, k: usize) -> &mut Tensor {
        let ne = self.encoder_blocks();
        if k < ne {
            self.model.encoder.params_mut().swap_remove(k)
        } else {
            self.model.decoder.params_mut().swap_remove(k - ne)
        }
    }

    fn loss(&mut self) -> Result<f64> {
        let xhat = self.model.reconstruct(&self.batch)?;
        Ok(loss_total(&self.batch, &xhat, self.model)?.total)
    }

    fn loss_and_grads(&mut self) -> Result<(f64, Vec<Tensor>)> {
        let pass = self.model.forward_eval_pass(&self.batch)?;
        let (loss, g) = loss_total_with_grad(&self.batch, &pass.output, self.model)?;
        let (enc, mut dec) = self.model.backward(&pass, &g, true)?;
        let mut enc = enc.expect("encoder gradients requested");
        self.model.add_l2_grads(Some(&mut enc), &mut dec, self.model.config.alpha_d);
        enc.extend(dec);
        Ok((loss.total, enc))
    }
}
