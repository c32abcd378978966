//! Invariants checked over random inputs.

use piconvae_core::attacks::{inject, schedule_targets, target_count, AttackCampaign, AttackKind, Placement};
use piconvae_core::neural::{Conv1d, ConvTranspose1d, Tensor};
use piconvae_core::scoring::{physics_score, verdicts, Confusion, SolvedForm};
use piconvae_core::telemetry::{
    fold_windows, windowize_rows, Aggregation, Channel, MeasurementFrame, MinMax, SeriesSet, CHANNELS,
};
use proptest::prelude::*;

fn rows(len: usize, seed: u64) -> Vec<[f64; CHANNELS]> {
    (0..len)
        .map(|t| core::array::from_fn(|c| ((t * 31 + c * 7) as f64 + seed as f64 * 0.37).sin()))
        .collect()
}

fn frames(len: usize, seed: u64) -> Vec<MeasurementFrame> {
    (0..len)
        .map(|t| {
            let x = (t as f64 + seed as f64) * 0.1;
            MeasurementFrame::from_phasors(t as u64, 1.0 + 0.05 * x.sin(), 0.5 + 0.2 * x.cos(), 0.3 * x.sin(), -0.2 + 0.1 * x.cos())
        })
        .collect()
}

fn tensor(shape: &[usize], vals: &[f64]) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), vals.iter().copied().cycle().take(n).collect()).unwrap()
}

proptest! {
    #[test]
    fn windows_match_brute_force(len in 1usize..=50, w in 1usize..=50, step in 1usize..=8, seed in 0u64..100) {
        prop_assume!(w <= len);
        let r = rows(len, seed);
        let b = windowize_rows(&r, w, step).unwrap();
        let mut expect = Vec::new();
        let mut origin = 0;
        while origin + w <= len {
            prop_assert_eq!(b.origins()[expect.len()], origin);
            expect.push(origin);
            origin += step;
        }
        prop_assert_eq!(b.count(), expect.len());
        for (k, &o) in expect.iter().enumerate() {
            let flat: Vec<f64> = r[o..o + w].iter().flatten().copied().collect();
            prop_assert_eq!(b.window(k), &flat[..]);
        }
    }

    #[test]
    fn folding_unit_step_windows_recovers_rows(len in 1usize..=50, w in 1usize..=16, seed in 0u64..100) {
        prop_assume!(w <= len);
        let r = rows(len, seed);
        let b = windowize_rows(&r, w, 1).unwrap();
        for agg in [Aggregation::Mean, Aggregation::Median] {
            let back = fold_windows(b.data(), b.origins(), w, len, agg).unwrap();
            for (x, y) in back.iter().zip(&r) {
                for c in 0..CHANNELS {
                    prop_assert!((x[c] - y[c]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn minmax_round_trip(len in 2usize..=60, seed in 0u64..100, probe in -5.0f64..5.0) {
        let r = rows(len, seed);
        let mm = match MinMax::fit(r.iter().copied()) {
            Ok(m) => m,
            Err(_) => return Ok(()),
        };
        for row in &r {
            let n = mm.apply_row(*row);
            for c in 0..CHANNELS {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&n[c]));
            }
            let back = mm.invert_row(n);
            for c in 0..CHANNELS {
                prop_assert!((back[c] - row[c]).abs() <= 1e-12);
            }
        }
        for c in 0..CHANNELS {
            prop_assert!((mm.invert(c, mm.apply(c, probe)) - probe).abs() <= 1e-12);
        }
    }

    #[test]
    fn conv_transpose_is_the_adjoint(
        n in 1usize..3,
        c in 1usize..4,
        f in 1usize..4,
        k in prop::sample::select(vec![1usize, 3, 5]),
        l in 1usize..10,
        vals in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let w = tensor(&[f, c, k], &vals);
        let conv = Conv1d::from_parts(w.clone(), Tensor::zeros(&[f])).unwrap();
        let convt = ConvTranspose1d::from_parts(w, Tensor::zeros(&[c])).unwrap();
        let x = tensor(&[n, c, l], &vals[7..]);
        let y = tensor(&[n, f, l], &vals[13..]);
        let lhs = conv.forward(&x).unwrap().0.inner(&y);
        let rhs = x.inner(&convt.forward(&y).unwrap().0);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn raising_the_threshold_never_adds_positives(
        scores in prop::collection::vec(0.0f64..1.0, 1..80),
        flags in prop::collection::vec(any::<bool>(), 80),
        t1 in 0.0f64..1.0,
        dt in 0.0f64..0.5,
    ) {
        let labels = &flags[..scores.len()];
        let lo = Confusion::from_verdicts(&verdicts(&scores, t1), labels).unwrap();
        let hi = Confusion::from_verdicts(&verdicts(&scores, t1 + dt), labels).unwrap();
        prop_assert!(hi.fp <= lo.fp);
        prop_assert!(hi.tp <= lo.tp);
        for m in [&lo, &hi] {
            let acc = m.metrics().acc;
            prop_assert!((acc * m.total() as f64 - (m.tp + m.tn) as f64).abs() <= 1e-9);
            prop_assert_eq!(m.total(), scores.len());
        }
    }

    #[test]
    fn injection_touches_exactly_the_targets(
        seed in 0u64..1000,
        fraction in 0.01f64..0.3,
        kind in prop::sample::select(vec![AttackKind::Additive, AttackKind::Deductive, AttackKind::Combined]),
        ch in 0usize..CHANNELS,
    ) {
        let s = SeriesSet::new(frames(200, seed)).unwrap();
        let test = s.test_range();
        let count = target_count(test.len(), fraction);
        let targets: Vec<usize> = schedule_targets(test.len(), count, seed, Placement::Random)
            .unwrap()
            .into_iter()
            .map(|t| t + test.start)
            .collect();
        let (alpha_min, alpha_max) = match kind {
            AttackKind::Additive => (0.0, 0.05),
            AttackKind::Deductive => (-0.05, 0.0),
            AttackKind::Combined => (-0.05, 0.05),
        };
        let channel = Channel::ALL[ch];
        let inj = inject(&s, &AttackCampaign {
            kind,
            alpha_min,
            alpha_max,
            fixed_magnitude: None,
            channel,
            target_indices: targets.clone(),
            seed,
        }).unwrap();
        let mut changed = 0;
        for (t, (a, b)) in s.frames().iter().zip(inj.series.frames()).enumerate() {
            for c in Channel::ALL {
                if a.get(c) != b.get(c) {
                    prop_assert_eq!(c, channel);
                    prop_assert!(targets.contains(&t));
                    changed += 1;
                }
            }
        }
        // a zero reading stays zero under scaling
        let nonzero = targets.iter().filter(|&&t| s.frames()[t].get(channel) != 0.0).count();
        prop_assert_eq!(changed, nonzero);
        prop_assert_eq!(inj.labels.iter().filter(|&&l| l).count(), targets.len());
        let ups = inj.alphas.iter().filter(|(_, a)| *a > 0.0).count();
        let downs = inj.alphas.iter().filter(|(_, a)| *a < 0.0).count();
        match kind {
            AttackKind::Additive => prop_assert_eq!(ups, targets.len()),
            AttackKind::Deductive => prop_assert_eq!(downs, targets.len()),
            AttackKind::Combined => {
                prop_assert_eq!(ups, targets.len().div_ceil(2));
                prop_assert_eq!(downs, targets.len() / 2);
            }
        }
        for &(t, a) in &inj.alphas {
            prop_assert!(a.abs() <= 0.05 && a != 0.0);
            prop_assert_eq!(inj.series.frames()[t].get(channel), (1.0 + a) * s.frames()[t].get(channel));
        }
    }

    #[test]
    fn consistent_frames_satisfy_the_power_identities(
        v in 0.5f64..1.5,
        i in 0.0f64..2.0,
        theta in -3.1f64..3.1,
        delta in -3.1f64..3.1,
    ) {
        let f = MeasurementFrame::from_phasors(0, v, i, theta, delta);
        let (rp, rq) = f.power_residuals();
        prop_assert!(rp.abs() <= 1e-16 && rq.abs() <= 1e-16);
        prop_assume!(i > 0.1 && (theta - delta).cos().abs() > 0.1);
        for form in [SolvedForm::Divide, SolvedForm::Multiply] {
            let s = physics_score(&f.row(), form);
            prop_assert!(s[Channel::P.index()] <= 1e-16 && s[Channel::Q.index()] <= 1e-16);
            for c in [Channel::V, Channel::I, Channel::Theta, Channel::Delta] {
                prop_assert!(s[c.index()] <= 1e-9, "{:?} {:?} {}", form, c, s[c.index()]);
            }
        }
    }
}

#[test]
fn validation_values_outside_the_training_range_are_not_clipped() {
    let mut train: Vec<[f64; CHANNELS]> = vec![[2.0, 0.0, 0.0, 0.0, 0.0, 0.0], [6.0, 1.0, 1.0, 1.0, 1.0, 1.0]];
    train.push([4.0, 0.5, 0.5, 0.5, 0.5, 0.5]);
    let mm = MinMax::fit(train).unwrap();
    assert_eq!(mm.apply(0, 8.0), 1.5);
}
