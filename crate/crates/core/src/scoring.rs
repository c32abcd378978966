//! Anomaly scores, thresholds and confusion-matrix metrics.
//!
//! The score of channel `c` at time `t` is the normalized absolute
//! reconstruction error plus the Kirchhoff mismatch of the frame solved for
//! `c`. The per-timestep aggregate is the maximum over channels.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::model::PiConvAe;
use crate::neural::Tensor;
use crate::telemetry::{fold_windows, windowize_rows, Aggregation, Channel, MinMax, SeriesSet, CHANNELS};
use crate::{Error, Result};

/// Denominators below this magnitude drop their term from the physics score.
pub const DENOMINATOR_EPS: f64 = 1e-6;

pub const DEFAULT_QUANTILE: f64 = 0.995;

const V: usize = Channel::V as usize;
const I: usize = Channel::I as usize;
const TH: usize = Channel::Theta as usize;
const DL: usize = Channel::Delta as usize;
const P: usize = Channel::P as usize;
const Q: usize = Channel::Q as usize;

const SCORE_CHUNK: usize = 256;

/// Form of the voltage and current mismatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SolvedForm {
    /// `|V − P/(I·cos φ)|² + |V − Q/(I·sin φ)|²`, guarded.
    #[default]
    Divide,
    /// `|P − V·I·cos φ|² + |Q − V·I·sin φ|²`.
    Multiply,
}

/// Which values enter the physics score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PhysicsSource {
    /// The measured frame as received.
    #[default]
    Measured,
    /// The measured frame with the channel under test replaced by its
    /// reconstruction.
    Substituted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ScoreConfig {
    pub quantile: f64,
    pub aggregation: Aggregation,
    pub solved_form: SolvedForm,
    pub physics_source: PhysicsSource,
    /// `false` scores by reconstruction error alone.
    pub physics: bool,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            quantile: DEFAULT_QUANTILE,
            aggregation: Aggregation::Mean,
            solved_form: SolvedForm::Divide,
            physics_source: PhysicsSource::Measured,
            physics: true,
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.quantile) {
            return Err(Error::Config(format!("quantile {} outside [0, 1]", self.quantile)));
        }
        Ok(())
    }
}

/// `|x − x̂|` per row and channel.
pub fn pointwise_scores(x: &[[f64; CHANNELS]], xhat: &[[f64; CHANNELS]]) -> Result<Vec<[f64; CHANNELS]>> {
    if x.len() != xhat.len() {
        return Err(Error::Shape(format!("{} rows against {} reconstructed rows", x.len(), xhat.len())));
    }
    Ok(x.iter()
        .zip(xhat)
        .map(|(a, b)| core::array::from_fn(|c| libm::fabs(a[c] - b[c])))
        .collect())
}

fn sq(v: f64) -> f64 {
    v * v
}

/// `a / b`, or `None` when `|b|` is below the guard.
fn guarded(a: f64, b: f64) -> Option<f64> {
    (libm::fabs(b) >= DENOMINATOR_EPS).then(|| a / b)
}

fn wrap(a: f64) -> f64 {
    let r = libm::remainder(a, 2.0 * PI);
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Kirchhoff mismatch of one channel in a physical-unit frame.
pub fn physics_score_channel(f: &[f64; CHANNELS], channel: Channel, form: SolvedForm) -> f64 {
    let phi = f[TH] - f[DL];
    let (c, s) = (libm::cos(phi), libm::sin(phi));
    let solved = |x: f64, other: f64| {
        guarded(f[P], other * c).map_or(0.0, |v| sq(x - v)) + guarded(f[Q], other * s).map_or(0.0, |v| sq(x - v))
    };
    let power = || sq(f[P] - f[V] * f[I] * c) + sq(f[Q] - f[V] * f[I] * s);
    let angle = || {
        (libm::hypot(f[P], f[Q]) >= DENOMINATOR_EPS).then(|| libm::atan2(f[Q], f[P]))
    };
    match channel {
        Channel::V => match form {
            SolvedForm::Divide => solved(f[V], f[I]),
            SolvedForm::Multiply => power(),
        },
        Channel::I => match form {
            SolvedForm::Divide => solved(f[I], f[V]),
            SolvedForm::Multiply => power(),
        },
        Channel::Theta => angle().map_or(0.0, |a| sq(wrap(f[TH] - f[DL] - a))),
        Channel::Delta => angle().map_or(0.0, |a| sq(wrap(f[TH] - a - f[DL]))),
        Channel::P => sq(f[P] - f[V] * f[I] * c),
        Channel::Q => sq(f[Q] - f[V] * f[I] * s),
    }
}

/// Mismatch of every channel form for one frame.
pub fn physics_score(frame: &[f64; CHANNELS], form: SolvedForm) -> [f64; CHANNELS] {
    core::array::from_fn(|c| physics_score_channel(frame, Channel::ALL[c], form))
}

/// Type-7 (linear interpolation) quantile.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("quantile of no values"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Config(format!("quantile {q} outside [0, 1]")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("scores".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// The detection threshold: a quantile of clean validation aggregate scores.
pub fn threshold_from_validation(val_scores: &[f64], q: f64) -> Result<f64> {
    quantile(val_scores, q)
}

pub fn verdicts(aggregate: &[f64], threshold: f64) -> Vec<bool> {
    aggregate.iter().map(|&s| s > threshold).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_verdicts(verdicts: &[bool], labels: &[bool]) -> Result<Confusion> {
        if verdicts.len() != labels.len() {
            return Err(Error::Shape(format!("{} verdicts against {} labels", verdicts.len(), labels.len())));
        }
        let mut c = Confusion::default();
        for (&v, &l) in verdicts.iter().zip(labels) {
            match (v, l) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn metrics(&self) -> Metrics {
        let f = |v: usize| v as f64;
        let acc = if self.total() == 0 { 1.0 } else { f(self.tp + self.tn) / f(self.total()) };
        let prec_undefined = self.tp + self.fp == 0;
        let rec_undefined = self.tp + self.fn_ == 0;
        let prec = if prec_undefined { 1.0 } else { f(self.tp) / f(self.tp + self.fp) };
        let rec = if rec_undefined { 1.0 } else { f(self.tp) / f(self.tp + self.fn_) };
        let f1 = f1_score(prec, rec);
        Metrics {
            acc,
            prec,
            rec,
            f1,
            prec_undefined,
            rec_undefined,
        }
    }

    pub fn false_positive_rate(&self) -> f64 {
        let neg = self.fp + self.tn;
        if neg == 0 {
            0.0
        } else {
            self.fp as f64 / neg as f64
        }
    }
}

/// Accuracy, precision, recall and F1. Undefined ratios are reported as 1.0
/// and flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub acc: f64,
    pub prec: f64,
    pub rec: f64,
    pub f1: f64,
    pub prec_undefined: bool,
    pub rec_undefined: bool,
}

/// F1 from precision and recall.
pub fn f1_score(prec: f64, rec: f64) -> f64 {
    if prec + rec == 0.0 {
        0.0
    } else {
        2.0 * prec * rec / (prec + rec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyReport {
    /// Absolute row index of the first scored timestep.
    pub start: usize,
    /// Per-timestep, per-channel scores.
    pub scores: Vec<[f64; CHANNELS]>,
    pub aggregate: Vec<f64>,
    pub threshold: f64,
    pub verdicts: Vec<bool>,
    pub labels: Vec<bool>,
    pub confusion: Confusion,
    pub metrics: Metrics,
}

/// Thresholds per-channel scores and compares against labels.
pub fn evaluate(scores: Vec<[f64; CHANNELS]>, threshold: f64, labels: &[bool], start: usize) -> Result<AnomalyReport> {
    let aggregate = aggregate_scores(&scores);
    let verdicts = verdicts(&aggregate, threshold);
    let confusion = Confusion::from_verdicts(&verdicts, labels)?;
    Ok(AnomalyReport {
        start,
        scores,
        aggregate,
        threshold,
        verdicts,
        labels: labels.to_vec(),
        confusion,
        metrics: confusion.metrics(),
    })
}

/// Maximum over channels.
pub fn aggregate_scores(scores: &[[f64; CHANNELS]]) -> Vec<f64> {
    scores.iter().map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect()
}

/// Oracle mode: the threshold maximizing F1 on labelled scores. It looks at
/// the labels, so it only bounds what a calibrated threshold can reach.
pub fn oracle_best_f1(aggregate: &[f64], labels: &[bool]) -> Result<(f64, Metrics)> {
    if aggregate.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores against {} labels", aggregate.len(), labels.len())));
    }
    if aggregate.is_empty() {
        return Err(Error::Empty("oracle scores"));
    }
    let mut cands = aggregate.to_vec();
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let mut best: Option<(f64, Metrics)> = None;
    // thresholds just below each distinct score, plus one above them all
    let above = cands[cands.len() - 1];
    for t in cands.iter().map(|&s| next_down(s)).chain([above]) {
        let m = Confusion::from_verdicts(&verdicts(aggregate, t), labels)?.metrics();
        if best.as_ref().is_none_or(|(_, b)| m.f1 > b.f1) {
            best = Some((t, m));
        }
    }
    Ok(best.expect("at least one candidate"))
}

fn next_down(x: f64) -> f64 {
    if x.is_nan() || x == f64::NEG_INFINITY {
        return x;
    }
    if x == 0.0 {
        return -f64::from_bits(1);
    }
    let b = x.to_bits();
    f64::from_bits(if x > 0.0 { b - 1 } else { b + 1 })
}

/// Scores rows of a series against a trained model.
pub struct Scorer<'a> {
    pub model: &'a PiConvAe,
    pub config: ScoreConfig,
}

impl<'a> Scorer<'a> {
    pub fn new(model: &'a PiConvAe, config: ScoreConfig) -> Result<Scorer<'a>> {
        config.validate()?;
        if model.minmax.is_none() {
            return Err(Error::Unfitted);
        }
        Ok(Scorer { model, config })
    }

    fn minmax(&self) -> &MinMax {
        self.model.minmax.as_ref().expect("checked in new")
    }

    /// Window-averaged reconstruction of normalized rows.
    pub fn reconstruct_rows(&self, rows: &[[f64; CHANNELS]]) -> Result<Vec<[f64; CHANNELS]>> {
        let w = self.model.config.window;
        let windows = windowize_rows(rows, w, 1)?;
        let mut out = Vec::with_capacity(windows.data().len());
        let idx: Vec<usize> = (0..windows.count()).collect();
        for chunk in idx.chunks(SCORE_CHUNK) {
            let x = Tensor::new(vec![chunk.len(), w, CHANNELS], windows.gather(chunk))?;
            out.extend_from_slice(self.model.reconstruct(&x)?.data());
        }
        fold_windows(&out, windows.origins(), w, rows.len(), self.config.aggregation)
    }

    /// Per-channel scores for `range` of `series` (raw or normalized).
    pub fn channel_scores(&self, series: &SeriesSet, range: Range<usize>) -> Result<Vec<[f64; CHANNELS]>> {
        let mm = self.minmax();
        let rows = series.rows(range);
        let (norm, phys): (Vec<_>, Vec<_>) = if series.is_normalized() {
            let own = series.minmax().ok_or(Error::Unfitted)?;
            rows.iter().map(|r| {
                let p = own.invert_row(*r);
                (mm.apply_row(p), p)
            }).unzip()
        } else {
            rows.iter().map(|r| (mm.apply_row(*r), *r)).unzip()
        };
        self.score_rows(&norm, &phys)
    }

    /// Scores from normalized rows and the matching physical-unit rows.
    pub fn score_rows(&self, norm: &[[f64; CHANNELS]], phys: &[[f64; CHANNELS]]) -> Result<Vec<[f64; CHANNELS]>> {
        if norm.len() != phys.len() {
            return Err(Error::Shape("normalized and physical rows differ in length".into()));
        }
        let xhat = self.reconstruct_rows(norm)?;
        let mut scores = pointwise_scores(norm, &xhat)?;
        if self.config.physics {
            let mm = self.minmax();
            let form = self.config.solved_form;
            for ((s, p), xh) in scores.iter_mut().zip(phys).zip(&xhat) {
                for ch in Channel::ALL {
                    let c = ch.index();
                    let a = match self.config.physics_source {
                        PhysicsSource::Measured => physics_score_channel(p, ch, form),
                        PhysicsSource::Substituted => {
                            let mut f = *p;
                            f[c] = mm.invert(c, xh[c]);
                            physics_score_channel(&f, ch, form)
                        }
                    };
                    s[c] += a;
                }
            }
        }
        if scores.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("anomaly scores".into()));
        }
        Ok(scores)
    }

    /// Threshold from the (clean) validation split.
    pub fn calibrate(&self, series: &SeriesSet) -> Result<f64> {
        let agg = aggregate_scores(&self.channel_scores(series, series.val_range())?);
        threshold_from_validation(&agg, self.config.quantile)
    }

    /// Scores the test split and evaluates against per-test-sample labels.
    pub fn detect(&self, series: &SeriesSet, labels: &[bool], threshold: f64) -> Result<AnomalyReport> {
        let range = series.test_range();
        if labels.len() != range.len() {
            return Err(Error::Shape(format!("{} labels for {} test samples", labels.len(), range.len())));
        }
        let start = range.start;
        evaluate(self.channel_scores(series, range)?, threshold, labels, start)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{generate_synthetic, GeneratorConfig, MeasurementFrame};

    #[test]
    fn pointwise_basics() {
        let x = vec![[0.5; CHANNELS]; 3];
        assert!(pointwise_scores(&x, &x).unwrap().iter().flatten().all(|&v| v == 0.0));
        assert!(pointwise_scores(&x, &x[..2]).is_err());
        let mut y = x.clone();
        y[1][V] *= 1.05;
        assert!(pointwise_scores(&x, &y).unwrap()[1][V] > 0.0);
    }

    #[test]
    fn consistent_frames_score_zero() {
        let s = generate_synthetic(&GeneratorConfig {
            length: 500,
            ..GeneratorConfig::default()
        })
        .unwrap();
        for f in s.frames() {
            for form in [SolvedForm::Divide, SolvedForm::Multiply] {
                let a = physics_score(&f.row(), form);
                assert!(a.iter().all(|&v| v < 1e-20), "{a:?}");
            }
        }
    }

    #[test]
    fn p_form_hand_values() {
        // V=1, I=2, θ−δ=π/3 gives P = 1 exactly
        let mut f = [1.0, 2.0, PI / 3.0, 0.0, 1.0, 0.0];
        assert!(physics_score_channel(&f, Channel::P, SolvedForm::Divide) < 1e-30);
        f[P] = 1.2;
        assert!((physics_score_channel(&f, Channel::P, SolvedForm::Divide) - 0.04).abs() < 1e-12);
    }

    #[test]
    fn cosine_term_dropped_at_right_angle() {
        let f = MeasurementFrame::from_phasors(0, 1.0, 1.0, PI / 2.0, 0.0).row();
        let mut g = f;
        g[V] = 1.1;
        // only the sine term remains: (1.1 − Q/I)² with Q = 1
        let a = physics_score_channel(&g, Channel::V, SolvedForm::Divide);
        assert!((a - 0.01).abs() < 1e-12, "{a}");
    }

    #[test]
    fn quantile_values() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(quantile(&v, 0.5).unwrap(), 50.5);
        assert_eq!(quantile(&v, 1.0).unwrap(), 100.0);
        assert_eq!(quantile(&[3.0; 7], 0.995).unwrap(), 3.0);
        assert!(quantile(&[], 0.5).is_err());
        assert!(quantile(&v, 1.5).is_err());
    }

    #[test]
    fn metric_formulas() {
        let c = Confusion { tp: 38, fn_: 2, fp: 0, tn: 1472 };
        let m = c.metrics();
        assert_eq!(m.rec, 0.95);
        assert!((m.f1 - 2.0 * 0.95 / 1.95).abs() < 1e-15);
        assert!((m.f1 - 0.97436).abs() < 5e-6);
        assert!((m.acc * c.total() as f64 - (c.tp + c.tn) as f64).abs() < 1e-9);

        let clean = Confusion { tn: 10, ..Confusion::default() }.metrics();
        assert_eq!(clean.acc, 1.0);
        assert!(clean.rec_undefined && clean.prec_undefined);

        let none = Confusion { fn_: 3, ..Confusion::default() }.metrics();
        assert_eq!(none.f1, 0.0);
    }

    #[test]
    fn evaluate_checks_lengths() {
        assert!(evaluate(vec![[0.0; CHANNELS]; 3], 0.1, &[false; 2], 0).is_err());
        let r = evaluate(vec![[0.0, 0.3, 0.0, 0.0, 0.0, 0.0], [0.0; CHANNELS]], 0.1, &[true, false], 5).unwrap();
        assert_eq!(r.verdicts, vec![true, false]);
        assert_eq!(r.aggregate[0], 0.3);
        assert_eq!(r.confusion, Confusion { tp: 1, tn: 1, fp: 0, fn_: 0 });
    }

    #[test]
    fn oracle_finds_separating_threshold() {
        let agg = [0.1, 0.2, 0.9, 0.3, 0.8];
        let labels = [false, false, true, false, true];
        let (t, m) = oracle_best_f1(&agg, &labels).unwrap();
        assert_eq!(m.f1, 1.0);
        assert!(t >= 0.3 && t < 0.8);
    }
}
