//! Multiplicative false-data injection: `Z_comp(t) = (1 + α(t))·Z_act(t)`.
//!
//! Attacks are applied to physical-unit data, before normalization. P and Q
//! are left as they are when another channel is attacked, so the power
//! identities break on attacked samples.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::telemetry::{Channel, SeriesSet};
use crate::{Error, Result};

/// Default bound on |α|.
pub const DEFAULT_MAX_MAGNITUDE: f64 = 0.05;

/// Default share of test samples attacked (about 40 of 1512).
pub const DEFAULT_ATTACKED_FRACTION: f64 = 0.026;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum AttackKind {
    /// α(t) > 0
    Additive,
    /// α(t) < 0
    Deductive,
    /// Equal numbers of positive and negative draws (within one).
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Placement {
    /// Uniform without replacement.
    #[default]
    Random,
    /// One run at a seeded offset.
    Contiguous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackCampaign {
    pub kind: AttackKind,
    /// Signed lower bound of α.
    pub alpha_min: f64,
    /// Signed upper bound of α.
    pub alpha_max: f64,
    /// When set, every draw has exactly this |α| (sensitivity sweeps).
    pub fixed_magnitude: Option<f64>,
    pub channel: Channel,
    /// Absolute sample indices; must lie in the test split.
    pub target_indices: Vec<usize>,
    pub seed: u64,
}

/// Result of [`inject`].
#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub series: SeriesSet,
    /// One label per test sample, `true` where attacked.
    pub labels: Vec<bool>,
    /// `(sample index, α)` for every attacked sample, in index order.
    pub alphas: Vec<(usize, f64)>,
}

impl AttackCampaign {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.alpha_min, self.alpha_max);
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo > -1.0) {
            return Err(Error::Config(format!("invalid α bounds [{lo}, {hi}]")));
        }
        if let Some(m) = self.fixed_magnitude {
            if !(m > 0.0 && m < 1.0) {
                return Err(Error::Config(format!("fixed magnitude must lie in (0, 1), got {m}")));
            }
        }
        let need_pos = matches!(self.kind, AttackKind::Additive | AttackKind::Combined);
        let need_neg = matches!(self.kind, AttackKind::Deductive | AttackKind::Combined);
        if self.fixed_magnitude.is_none() && ((need_pos && hi <= 0.0) || (need_neg && lo >= 0.0)) {
            return Err(Error::Config(format!(
                "α bounds [{lo}, {hi}] admit no draw of the sign a {:?} attack needs",
                self.kind
            )));
        }
        Ok(())
    }

    /// Draws the α sequence for `n` targets. Never returns zero.
    pub fn draw_alphas(&self, n: usize) -> Result<Vec<f64>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut signs: Vec<bool> = match self.kind {
            AttackKind::Additive => vec![true; n],
            AttackKind::Deductive => vec![false; n],
            AttackKind::Combined => (0..n).map(|k| k < n.div_ceil(2)).collect(),
        };
        if self.kind == AttackKind::Combined {
            signs.shuffle(&mut rng);
        }
        let pos = (self.alpha_min.max(0.0), self.alpha_max);
        let neg = (self.alpha_min, self.alpha_max.min(0.0));
        let alphas = signs
            .into_iter()
            .map(|positive| {
                let u: f64 = rng.random();
                match (self.fixed_magnitude, positive) {
                    (Some(m), true) => m,
                    (Some(m), false) => -m,
                    // (lo, hi]: excludes zero when lo = 0
                    (None, true) => pos.1 - (pos.1 - pos.0) * u,
                    // [lo, hi): excludes zero when hi = 0
                    (None, false) => neg.0 + (neg.1 - neg.0) * u,
                }
            })
            .collect();
        Ok(alphas)
    }
}

/// Applies the campaign to a physical-unit series.
pub fn inject(s: &SeriesSet, c: &AttackCampaign) -> Result<Injection> {
    if s.is_normalized() {
        return Err(Error::Config("attacks must be applied before normalization".into()));
    }
    let test = s.test_range();
    let mut targets = c.target_indices.clone();
    targets.sort_unstable();
    targets.dedup();
    if targets.len() != c.target_indices.len() {
        return Err(Error::Config("duplicate attack targets".into()));
    }
    if let Some(&bad) = targets.iter().find(|&&t| !test.contains(&t)) {
        return Err(Error::TargetOutsideTest {
            index: bad,
            start: test.start,
            end: test.end,
        });
    }
    let alphas = c.draw_alphas(targets.len())?;

    let mut series = s.clone();
    let mut labels = vec![false; test.len()];
    let frames = series.frames_mut();
    for (&t, &a) in targets.iter().zip(&alphas) {
        let f = &mut frames[t];
        f.set(c.channel, (1.0 + a) * f.get(c.channel));
        labels[t - test.start] = true;
    }
    Ok(Injection {
        series,
        labels,
        alphas: targets.into_iter().zip(alphas).collect(),
    })
}

/// Picks `count` distinct, sorted offsets in `0..test_len`.
pub fn schedule_targets(test_len: usize, count: usize, seed: u64, placement: Placement) -> Result<Vec<usize>> {
    if count > test_len {
        return Err(Error::Config(format!(
            "cannot attack {count} of {test_len} test samples"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = match placement {
        Placement::Random => rand::seq::index::sample(&mut rng, test_len, count).into_vec(),
        Placement::Contiguous => {
            let start = rng.random_range(0..=test_len - count);
            (start..start + count).collect()
        }
    };
    out.sort_unstable();
    Ok(out)
}

/// Attacked-sample count for a fraction of the test region (rounded up).
pub fn target_count(test_len: usize, fraction: f64) -> usize {
    libm::ceil(test_len as f64 * fraction.clamp(0.0, 1.0)) as usize
}

/// Evenly spaced magnitude levels in `[lo, hi]`, rounded to 12 decimals so
/// that e.g. `(0.01, 0.05, 5)` yields exactly `0.03`.
pub fn magnitude_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0) {
        return Err(Error::Config(format!(
            "lowest magnitude must be positive (α = 0 is no attack), got {lo}"
        )));
    }
    if !(hi >= lo) || steps == 0 {
        return Err(Error::Config(format!("invalid grid ({lo}, {hi}, {steps})")));
    }
    if steps == 1 {
        if hi != lo {
            return Err(Error::Config("a one-step grid needs lo == hi".into()));
        }
        return Ok(vec![lo]);
    }
    let n = (steps - 1) as f64;
    Ok((0..steps)
        .map(|k| {
            let k = k as f64;
            let v = (lo * (n - k) + hi * k) / n;
            libm::round(v * 1e12) / 1e12
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{generate_synthetic, GeneratorConfig};

    fn series() -> SeriesSet {
        generate_synthetic(&GeneratorConfig {
            length: 400,
            seed: 11,
            ..GeneratorConfig::default()
        })
        .unwrap()
    }

    fn campaign(kind: AttackKind, targets: Vec<usize>) -> AttackCampaign {
        AttackCampaign {
            kind,
            alpha_min: -0.05,
            alpha_max: 0.05,
            fixed_magnitude: None,
            channel: Channel::I,
            target_indices: targets,
            seed: 5,
        }
    }

    #[test]
    fn eq1_arithmetic() {
        let s = series();
        let t = s.test_range().start + 3;
        let mut c = campaign(AttackKind::Additive, vec![t]);
        c.fixed_magnitude = Some(0.05);
        let mut s2 = s.clone();
        s2.frames_mut()[t].i = 2.0;
        let out = inject(&s2, &c).unwrap();
        assert!((out.series.frames()[t].i - 2.1).abs() < 1e-15);
    }

    #[test]
    fn only_target_cells_change() {
        let s = series();
        let test = s.test_range();
        let targets: Vec<usize> = test.clone().step_by(7).collect();
        let out = inject(&s, &campaign(AttackKind::Combined, targets.clone())).unwrap();
        let mut changed = Vec::new();
        for (t, (a, b)) in s.frames().iter().zip(out.series.frames()).enumerate() {
            for ch in Channel::ALL {
                if a.get(ch) != b.get(ch) {
                    assert_eq!(ch, Channel::I);
                    changed.push(t);
                }
            }
        }
        assert_eq!(changed, targets);
        let labelled: Vec<usize> = out
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l)
            .map(|(k, _)| k + test.start)
            .collect();
        assert_eq!(labelled, targets);
    }

    #[test]
    fn sign_pattern_matches_kind() {
        let s = series();
        let test = s.test_range();
        let targets: Vec<usize> = test.clone().take(40).collect();
        for kind in [AttackKind::Additive, AttackKind::Deductive, AttackKind::Combined] {
            let out = inject(&s, &campaign(kind, targets.clone())).unwrap();
            let (mut pos, mut neg) = (0, 0);
            for &t in &targets {
                let ratio = out.series.frames()[t].i / s.frames()[t].i - 1.0;
                assert!(ratio != 0.0 && ratio.abs() <= 0.05 + 1e-12);
                if ratio > 0.0 {
                    pos += 1
                } else {
                    neg += 1
                }
            }
            match kind {
                AttackKind::Additive => assert_eq!((pos, neg), (40, 0)),
                AttackKind::Deductive => assert_eq!((pos, neg), (0, 40)),
                AttackKind::Combined => assert_eq!((pos, neg), (20, 20)),
            }
        }
    }

    #[test]
    fn combined_odd_count_differs_by_one() {
        let alphas = campaign(AttackKind::Combined, vec![]).draw_alphas(41).unwrap();
        let pos = alphas.iter().filter(|a| **a > 0.0).count();
        assert!(pos == 20 || pos == 21);
    }

    #[test]
    fn targets_outside_test_rejected() {
        let s = series();
        let err = inject(&s, &campaign(AttackKind::Additive, vec![0])).unwrap_err();
        assert!(matches!(err, Error::TargetOutsideTest { index: 0, .. }));
    }

    #[test]
    fn scheduling() {
        assert_eq!(schedule_targets(10, 10, 1, Placement::Random).unwrap(), (0..10).collect::<Vec<_>>());
        assert!(schedule_targets(10, 0, 1, Placement::Random).unwrap().is_empty());
        assert_eq!(
            schedule_targets(100, 5, 3, Placement::Random).unwrap(),
            schedule_targets(100, 5, 3, Placement::Random).unwrap()
        );
        let run = schedule_targets(100, 5, 3, Placement::Contiguous).unwrap();
        assert!(run.windows(2).all(|w| w[1] == w[0] + 1));
        assert!(schedule_targets(3, 4, 1, Placement::Random).is_err());
        assert_eq!(target_count(1512, DEFAULT_ATTACKED_FRACTION), 40);
    }

    #[test]
    fn zero_targets_all_clean() {
        let s = series();
        let out = inject(&s, &campaign(AttackKind::Combined, vec![])).unwrap();
        assert!(out.labels.iter().all(|l| !l));
        assert_eq!(out.series, s);
    }

    #[test]
    fn grid() {
        let g = magnitude_grid(0.01, 0.05, 5).unwrap();
        assert_eq!(g, vec![0.01, 0.02, 0.03, 0.04, 0.05]);
        assert_eq!(magnitude_grid(0.03, 0.03, 1).unwrap(), vec![0.03]);
        assert!(magnitude_grid(0.0, 0.05, 5).is_err());
    }
}
