//! End-to-end pipeline steps shared by the commands.

use piconvae_core::attacks::inject;
use piconvae_core::model::{train_with, EpochRecord, ModelConfig, PiConvAe, TrainReport};
use piconvae_core::scoring::{AnomalyReport, ScoreConfig, Scorer};
use piconvae_core::telemetry::{windowize_rows, MinMax, SeriesSet, WindowBatch};

use crate::config::AttackSpec;
use crate::error::CliResult;
use crate::io::SweepRow;

/// Normalization fitted on the training split and the windows it yields.
pub struct Prepared {
    pub minmax: MinMax,
    pub train: WindowBatch,
    pub val: WindowBatch,
}

pub fn prepare(series: &SeriesSet, window: usize) -> CliResult<Prepared> {
    let norm = series.clone().fit_minmax(series.train_range())?;
    let minmax = *norm.minmax().expect("just fitted");
    let norm = norm.apply_minmax()?;
    Ok(Prepared {
        minmax,
        train: windowize_rows(&norm.rows(norm.train_range()), window, 1)?,
        val: windowize_rows(&norm.rows(norm.val_range()), window, 1)?,
    })
}

/// Trains a fresh model on the clean series.
pub fn train_model<F: FnMut(&EpochRecord)>(
    series: &SeriesSet,
    config: &ModelConfig,
    on_epoch: F,
) -> CliResult<(PiConvAe, TrainReport)> {
    let p = prepare(series, config.window)?;
    let mut model = PiConvAe::new(config.clone())?.with_minmax(p.minmax)?;
    let report = train_with(&mut model, &p.train, &p.val, on_epoch)?;
    Ok((model, report))
}

/// Calibrates on the validation split of `series` and scores its test split.
pub fn detect(model: &PiConvAe, series: &SeriesSet, labels: &[bool], scoring: &ScoreConfig) -> CliResult<AnomalyReport> {
    let scorer = Scorer::new(model, *scoring)?;
    let threshold = scorer.calibrate(series)?;
    Ok(scorer.detect(series, labels, threshold)?)
}

/// Injects the configured campaign into a clean series and detects it.
pub fn attack_and_detect(
    model: &PiConvAe,
    clean: &SeriesSet,
    attack: &AttackSpec,
    scoring: &ScoreConfig,
) -> CliResult<(AnomalyReport, SeriesSet)> {
    let injected = inject(clean, &attack.campaign(clean)?)?;
    let report = detect(model, &injected.series, &injected.labels, scoring)?;
    Ok((report, injected.series))
}

/// One detection run per magnitude. Targets, signs and threshold are shared
/// across levels, so only |α| changes.
pub fn sweep(
    model: &PiConvAe,
    clean: &SeriesSet,
    attack: &AttackSpec,
    levels: &[f64],
    scoring: &ScoreConfig,
) -> CliResult<Vec<SweepRow>> {
    let scorer = Scorer::new(model, *scoring)?;
    let threshold = scorer.calibrate(clean)?;
    let mut rows = Vec::with_capacity(levels.len());
    for &alpha in levels {
        let spec = AttackSpec {
            magnitude: Some(alpha),
            ..attack.clone()
        };
        let injected = inject(clean, &spec.campaign(clean)?)?;
        let r = scorer.detect(&injected.series, &injected.labels, threshold)?;
        log::info!("sweep α={alpha}: prec {:.4} rec {:.4} f1 {:.4}", r.metrics.prec, r.metrics.rec, r.metrics.f1);
        rows.push(SweepRow {
            alpha,
            metrics: r.metrics,
            confusion: r.confusion,
        });
    }
    Ok(rows)
}
