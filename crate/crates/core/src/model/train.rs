use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::UpdateMode;
use super::loss::{loss_total, loss_total_with_grad, LossBreakdown};
use super::network::PiConvAe;
use crate::neural::{Mode, Sequential, Tensor};
use crate::telemetry::{WindowBatch, CHANNELS};
use crate::{Error, Result};

/// Window count per evaluation chunk.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Patience => "patience",
            StopReason::MaxEpochs => "max_epochs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub learning_rate: f64,
    /// Batch-averaged training objective (train mode, before each update).
    pub train: LossBreakdown,
    /// Validation objective in eval mode.
    pub val: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch with the lowest validation loss; its parameters are restored.
    pub best_epoch: Option<usize>,
    pub stop_reason: StopReason,
}

impl TrainReport {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.best_epoch.map(|e| &self.epochs[e - 1])
    }

    /// First epoch whose validation reconstruction error is at or below `target`.
    pub fn epochs_to_recon(&self, target: f64) -> Option<usize> {
        self.epochs.iter().find(|r| r.val.recon <= target).map(|r| r.epoch)
    }

    pub fn best_val_recon(&self) -> Option<f64> {
        self.epochs.iter().map(|r| r.val.recon).reduce(f64::min)
    }
}

fn batch_tensor(w: &WindowBatch, idx: &[usize]) -> Result<Tensor> {
    Tensor::new(vec![idx.len(), w.window_len(), CHANNELS], w.gather(idx))
}

/// Eval-mode objective over all windows, weighted by chunk size.
pub fn evaluate_loss(model: &PiConvAe, windows: &WindowBatch) -> Result<LossBreakdown> {
    if windows.is_empty() {
        return Err(Error::Empty("evaluation windows"));
    }
    let all: Vec<usize> = (0..windows.count()).collect();
    let mut acc = LossBreakdown::default();
    for chunk in all.chunks(EVAL_CHUNK) {
        let x = batch_tensor(windows, chunk)?;
        let xhat = model.reconstruct(&x)?;
        acc.add(&loss_total(&x, &xhat, model)?.scaled(chunk.len() as f64));
    }
    Ok(acc.scaled(1.0 / windows.count() as f64))
}

fn param_names(seq: &Sequential, prefix: &str) -> Vec<String> {
    seq.named_params(prefix).into_iter().map(|(n, _)| n).collect()
}

fn step_encoder(model: &mut PiConvAe, grads: &[Tensor], names: &[String]) -> Result<()> {
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut params = model.encoder.params_mut();
    model.encoder_opt.step(&mut params, grads, &names)
}

fn step_decoder(model: &mut PiConvAe, grads: &[Tensor], names: &[String]) -> Result<()> {
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut params = model.decoder.params_mut();
    model.decoder_opt.step(&mut params, grads, &names)
}

/// Full forward/backward; steps the encoder, and the decoder too when
/// `joint`. Returns the pre-update objective.
fn encoder_phase(
    model: &mut PiConvAe,
    x: &Tensor,
    rng: &mut ChaCha8Rng,
    names: (&[String], &[String]),
    joint: bool,
) -> Result<LossBreakdown> {
    let pass = model.forward(x, Mode::Train, rng)?;
    let (loss, g) = loss_total_with_grad(x, &pass.output, model)?;
    let (enc, mut dec) = model.backward(&pass, &g, true)?;
    let mut enc = enc.expect("encoder gradients requested");
    model.add_l2_grads(Some(&mut enc), &mut dec, model.config.alpha_d);
    step_encoder(model, &enc, names.0)?;
    if joint {
        step_decoder(model, &dec, names.1)?;
    }
    Ok(loss)
}

/// Fresh forward pass, decoder-only backward and step.
fn decoder_phase(model: &mut PiConvAe, x: &Tensor, rng: &mut ChaCha8Rng, names: &[String]) -> Result<()> {
    let pass = model.forward(x, Mode::Train, rng)?;
    let (_, g) = loss_total_with_grad(x, &pass.output, model)?;
    let (_, mut dec) = model.backward(&pass, &g, false)?;
    model.add_l2_grads(None, &mut dec, model.config.alpha_d);
    step_decoder(model, &dec, names)
}

/// One optimization step on a batch. Returns the pre-update objective.
fn train_batch(
    model: &mut PiConvAe,
    x: &Tensor,
    rng: &mut ChaCha8Rng,
    enc_names: &[String],
    dec_names: &[String],
) -> Result<LossBreakdown> {
    match model.config.update {
        UpdateMode::Joint => encoder_phase(model, x, rng, (enc_names, dec_names), true),
        UpdateMode::Alternating => {
            let loss = encoder_phase(model, x, rng, (enc_names, dec_names), false)?;
            decoder_phase(model, x, rng, dec_names)?;
            Ok(loss)
        }
    }
}

/// Trains on clean windows with early stopping on the validation objective.
pub fn train(model: &mut PiConvAe, train: &WindowBatch, val: &WindowBatch) -> Result<TrainReport> {
    train_with(model, train, val, |_| {})
}

/// Like [`train`], calling `on_epoch` after every epoch.
pub fn train_with<F: FnMut(&EpochRecord)>(
    model: &mut PiConvAe,
    train: &WindowBatch,
    val: &WindowBatch,
    mut on_epoch: F,
) -> Result<TrainReport> {
    let cfg = model.config.clone();
    if train.is_empty() {
        return Err(Error::Empty("training windows"));
    }
    if val.is_empty() {
        return Err(Error::Empty("validation windows"));
    }
    for w in [train, val] {
        if w.window_len() != cfg.window {
            return Err(Error::Shape(format!(
                "windows of length {} for a model with window {}",
                w.window_len(),
                cfg.window
            )));
        }
    }
    if cfg.physics_enabled && model.minmax.is_none() {
        return Err(Error::Unfitted);
    }

    let enc_names = param_names(&model.encoder, "enc");
    let dec_names = param_names(&model.decoder, "dec");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(model.epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut order: Vec<usize> = (0..train.count()).collect();

    let mut report = TrainReport {
        epochs: Vec::new(),
        best_epoch: None,
        stop_reason: StopReason::MaxEpochs,
    };
    let mut best: Option<(f64, Sequential, Sequential)> = None;
    let mut stale = 0;

    for e in 1..=cfg.epochs {
        model.encoder_opt.schedule_index = e - 1;
        model.decoder_opt.schedule_index = e - 1;
        order.shuffle(&mut rng);
        let mut batches: Vec<&[usize]> = order.chunks(cfg.batch_size).filter(|b| b.len() >= 2).collect();
        if let Some(cap) = cfg.steps_per_epoch {
            batches.truncate(cap);
        }
        if batches.is_empty() {
            return Err(Error::Empty("training batches (need at least two windows)"));
        }

        let mut acc = LossBreakdown::default();
        for (b, idx) in batches.iter().enumerate() {
            let x = batch_tensor(train, idx)?;
            let loss = train_batch(model, &x, &mut rng, &enc_names, &dec_names).map_err(|err| match err {
                Error::NonFinite(what) => Error::Diverged { epoch: e, batch: b, what },
                other => other,
            })?;
            acc.add(&loss);
        }
        let train_loss = acc.scaled(1.0 / batches.len() as f64);
        let val_loss = evaluate_loss(model, val).map_err(|err| match err {
            Error::NonFinite(what) => Error::Diverged {
                epoch: e,
                batch: batches.len(),
                what: format!("validation: {what}"),
            },
            other => other,
        })?;
        model.epoch += 1;

        let record = EpochRecord {
            epoch: e,
            learning_rate: model.encoder_opt.learning_rate(),
            train: train_loss,
            val: val_loss,
        };
        report.epochs.push(record);
        on_epoch(&record);

        if best.as_ref().is_none_or(|(v, _, _)| val_loss.total < *v) {
            best = Some((val_loss.total, model.encoder.clone(), model.decoder.clone()));
            report.best_epoch = Some(e);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                report.stop_reason = StopReason::Patience;
                break;
            }
        }
    }
    if let Some((_, enc, dec)) = best {
        model.encoder = enc;
        model.decoder = dec;
    }
    Ok(report)
}
