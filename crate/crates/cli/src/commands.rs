//! Command bodies. Each writes its outputs into the run directory and
//! returns their file names.

use std::path::{Path, PathBuf};

use piconvae_core::attacks::inject;
use piconvae_core::scoring::{oracle_best_f1, Confusion};
use piconvae_core::telemetry::generate_synthetic;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::harness;
use crate::io;
use crate::manifest::{Invocation, Manifest};

fn out(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

pub fn execute(inv: &Invocation, cfg: &RunConfig, dir: &Path) -> CliResult<Vec<String>> {
    match inv {
        Invocation::Generate => {
            let s = generate_synthetic(&cfg.generator)?;
            io::write_series(&out(dir, "data.csv"), s.frames())?;
            log::info!("generated {} samples", s.len());
            Ok(vec!["data.csv".into()])
        }
        Invocation::Inject { data } => {
            let clean = io::read_series(data)?.series;
            let inj = inject(&clean, &cfg.attack.campaign(&clean)?)?;
            io::write_series(&out(dir, "attacked.csv"), inj.series.frames())?;
            io::write_labels(&out(dir, "labels.csv"), &inj.series, &inj.labels)?;
            log::info!("attacked {} samples on channel {}", inj.alphas.len(), cfg.attack.channel);
            Ok(vec!["attacked.csv".into(), "labels.csv".into()])
        }
        Invocation::Train { data } => {
            let series = io::read_series(data)?.series;
            let (model, report) = harness::train_model(&series, &cfg.model, |r| {
                log::info!(
                    "epoch {}: train {:.6} val {:.6} (recon {:.6})",
                    r.epoch,
                    r.train.total,
                    r.val.total,
                    r.val.recon
                );
            })?;
            io::write_checkpoint(&out(dir, "model.ckpt"), &model)?;
            io::write_losses(&out(dir, "losses.csv"), &report.epochs, cfg.model.physics_enabled)?;
            let best = report.best();
            let summary = format!(
                "model = {}\nepochs = {}\nbest_epoch = {}\nbest_val_total = {}\nbest_val_recon = {}\nstop_reason = {}\n",
                if cfg.model.physics_enabled { "piconvae" } else { "convae" },
                report.epochs.len(),
                report.best_epoch.map_or("none".into(), |e| e.to_string()),
                best.map_or(f64::NAN, |b| b.val.total),
                report.best_val_recon().unwrap_or(f64::NAN),
                report.stop_reason.name()
            );
            io::write_text(&out(dir, "train.txt"), &summary)?;
            Ok(vec!["model.ckpt".into(), "losses.csv".into(), "train.txt".into()])
        }
        Invocation::Detect { model, data, labels } => {
            let model = io::read_checkpoint(model)?;
            let series = io::read_series(data)?.series;
            let mut outputs = vec!["verdicts.csv".into(), "metrics.txt".into()];
            let (report, series) = match labels {
                Some(l) => {
                    let labels = io::read_labels(l, &series)?;
                    (harness::detect(&model, &series, &labels, &cfg.scoring)?, series)
                }
                None => {
                    let (r, attacked) = harness::attack_and_detect(&model, &series, &cfg.attack, &cfg.scoring)?;
                    io::write_labels(&out(dir, "labels.csv"), &attacked, &r.labels)?;
                    outputs.push("labels.csv".into());
                    (r, attacked)
                }
            };
            io::write_verdicts(&out(dir, "verdicts.csv"), &series, &report)?;
            let text = io::metrics_text(
                &report.confusion,
                &report.metrics,
                &[("threshold", report.threshold.to_string()), ("quantile", cfg.scoring.quantile.to_string())],
            );
            io::write_text(&out(dir, "metrics.txt"), &text)?;
            log::info!(
                "prec {:.4} rec {:.4} f1 {:.4}",
                report.metrics.prec,
                report.metrics.rec,
                report.metrics.f1
            );
            Ok(outputs)
        }
        Invocation::Evaluate { verdicts, oracle } => {
            let v = io::read_verdicts(verdicts)?;
            let c = Confusion::from_verdicts(&v.verdicts, &v.labels)?;
            let mut text = io::metrics_text(&c, &c.metrics(), &[]);
            if *oracle {
                let (t, m) = oracle_best_f1(&v.scores, &v.labels)?;
                text += &format!(
                    "# oracle mode: threshold chosen with the labels\noracle_threshold = {t}\noracle_prec = {}\noracle_rec = {}\noracle_f1 = {}\n",
                    m.prec, m.rec, m.f1
                );
            }
            io::write_text(&out(dir, "metrics.txt"), &text)?;
            Ok(vec!["metrics.txt".into()])
        }
        Invocation::Sweep { model, data } => {
            let model = io::read_checkpoint(model)?;
            let series = io::read_series(data)?.series;
            let rows = harness::sweep(&model, &series, &cfg.attack, &cfg.sweep.levels()?, &cfg.scoring)?;
            io::write_sweep(&out(dir, "sweep.csv"), &rows)?;
            Ok(vec!["sweep.csv".into()])
        }
    }
}

/// Runs `inv` in `dir`, writing the manifest before and after.
pub fn run(inv: Invocation, cfg: RunConfig, dir: &Path) -> CliResult<Manifest> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut manifest = Manifest::new(inv, cfg)?;
    manifest.write(dir)?;
    let outputs = execute(&manifest.invocation, &manifest.config, dir)?;
    manifest.record_outputs(dir, &outputs)?;
    manifest.write(dir)?;
    Ok(manifest)
}

/// Outcome of a replay: `(file, recorded digest, reproduced digest)`.
pub struct ReplayReport {
    pub manifest: Manifest,
    pub files: Vec<(String, String, Option<String>)>,
}

impl ReplayReport {
    pub fn all_match(&self) -> bool {
        self.files.iter().all(|(_, a, b)| b.as_deref() == Some(a.as_str()))
    }
}

/// Re-runs a recorded invocation in `dir` and compares output digests.
pub fn replay(recorded: &Manifest, dir: &Path) -> CliResult<ReplayReport> {
    let changed = recorded.changed_inputs()?;
    if !changed.is_empty() {
        return Err(CliError::Data(format!("inputs changed since the run: {}", changed.join(", "))));
    }
    let manifest = run(recorded.invocation.clone(), recorded.config.clone(), dir)?;
    let files = recorded
        .outputs
        .iter()
        .map(|(name, digest)| (name.clone(), digest.clone(), manifest.outputs.get(name).cloned()))
        .collect();
    Ok(ReplayReport { manifest, files })
}
