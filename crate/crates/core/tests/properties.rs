//! Property tests over randomly generated inputs.

use neuroclean_core::channel_reject::{reject_bad_channels, BcrConfig};
use neuroclean_core::dsp::{design_butterworth, filtfilt};
use neuroclean_core::epoch::epoch;
use neuroclean_core::ml::{rank_features, roc_auc_ovr_micro, MlrModel};
use neuroclean_core::model::{Event, OutlierRule, ParamValue, Recording};
use neuroclean_core::qa::{one_over_f_similarity, snr_db};
use neuroclean_core::synth::pink_noise;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn auc_matches_pairwise_oracle(
        scores in prop::collection::vec(prop::collection::vec((0u8..6).prop_map(|v| v as f64 / 5.0), 3), 4..40),
        labels_seed in any::<u64>(),
    ) {
        let n = scores.len();
        let mut y: Vec<usize> = (0..n).map(|i| ((labels_seed >> (i % 60)) as usize + i) % 3).collect();
        y[0] = 0;
        y[1] = 1;
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (row, &label) in scores.iter().zip(&y) {
            for (k, &s) in row.iter().enumerate() {
                if k == label { pos.push(s) } else { neg.push(s) }
            }
        }
        let mut wins = 0.0;
        for &p in &pos {
            for &q in &neg {
                wins += if p > q { 1.0 } else if p == q { 0.5 } else { 0.0 };
            }
        }
        let oracle = wins / (pos.len() * neg.len()) as f64;
        let got = roc_auc_ovr_micro(&scores, &y).unwrap();
        prop_assert!((got - oracle).abs() < 1e-12, "{} vs {}", got, oracle);
    }

    #[test]
    fn ranking_ignores_positive_weight_scaling(
        weights in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 3),
        scale in 0.01f64..100.0,
    ) {
        let model = MlrModel { weights: weights.clone(), biases: vec![0.0; 3], converged: true, iterations: 0 };
        let scaled = MlrModel {
            weights: weights.iter().map(|w| w.iter().map(|v| v * scale).collect()).collect(),
            ..model.clone()
        };
        prop_assert_eq!(rank_features(&model), rank_features(&scaled));
    }
}

fn gaussian_rows(sigmas: &[f64], n: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sigmas
        .iter()
        .map(|&s| (0..n).map(|_| s * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn channel_rejection_only_shrinks_and_zeroes(
        sigmas in prop::collection::vec(prop_oneof![
            4 => 5.0f64..20.0,
            1 => 0.001f64..0.09,
            1 => 120.0f64..400.0,
            1 => 20.0f64..90.0,
        ], 6..16),
        pre_masked in prop::option::of(0usize..6),
        literal in any::<bool>(),
        max_iters in 1usize..7,
        seed in any::<u64>(),
    ) {
        let mut rec = Recording::from_rows(&gaussian_rows(&sigmas, 400, seed), 250.0).unwrap();
        if let Some(c) = pre_masked {
            rec.reject_channel(c);
        }
        let cfg = BcrConfig {
            max_iters,
            rule: if literal { OutlierRule::LiteralQuartile } else { OutlierRule::Iqr },
            ..BcrConfig::default()
        };
        let Ok((out, report)) = reject_bad_channels(&rec, &cfg) else {
            return Ok(());
        };
        prop_assert_eq!(out.n_channels(), rec.n_channels());
        prop_assert_eq!(out.n_samples(), rec.n_samples());
        let Some(ParamValue::Int(iters)) = report.params.get("iterations") else {
            panic!("iterations missing");
        };
        prop_assert!(*iters as usize <= max_iters);
        let rejected = &report.rejected_channel_indices;
        prop_assert!(rejected.windows(2).all(|w| w[0] < w[1]));
        for c in 0..rec.n_channels() {
            if !rec.channel_mask[c] {
                prop_assert!(!out.channel_mask[c]);
            }
            if out.channel_mask[c] {
                prop_assert_eq!(out.channel(c), rec.channel(c));
            } else {
                prop_assert!(out.channel(c).iter().all(|&v| v == 0.0));
            }
            prop_assert_eq!(rejected.contains(&c), rec.channel_mask[c] && !out.channel_mask[c]);
        }
    }

    #[test]
    fn filtfilt_is_linear_and_reversal_symmetric(
        half in prop::collection::vec(-50.0f64..50.0, 40..200),
        a in -10.0f64..10.0,
        order in 1usize..6,
        band in prop_oneof![Just((5.0, Some(40.0))), Just((10.0, None)), Just((8.0, Some(100.0)))],
    ) {
        let filter = design_butterworth(order, band.0, band.1, 250.0).unwrap();
        // Quiet margins let the start-up transients of both passes decay, so
        // the only asymmetry left would come from the filter itself.
        let mut x = vec![0.0; 1500];
        x.extend(&half);
        x.extend(half.iter().rev());
        x.extend(vec![0.0; 1500]);
        let y = filtfilt(&filter, &x).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| a * v).collect();
        let ys = filtfilt(&filter, &scaled).unwrap();
        let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (p, q) in ys.iter().zip(&y) {
            prop_assert!((p - a * q).abs() <= 1e-9 * scale * a.abs().max(1.0));
        }
        let n = y.len();
        for i in 0..n / 2 {
            prop_assert!((y[i] - y[n - 1 - i]).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn every_trial_has_exactly_p_samples(
        n_samples in 50usize..600,
        p in 2usize..120,
        stamps in prop::collection::vec(0usize..600, 1..20),
        offsets in prop::collection::vec(-30i64..30, 20),
    ) {
        let rows = vec![(0..n_samples).map(|i| i as f64).collect::<Vec<_>>(); 2];
        let rec = Recording::from_rows(&rows, 100.0).unwrap();
        let events: Vec<Event> = stamps
            .iter()
            .zip(&offsets)
            .filter(|(&t, _)| t < n_samples)
            .map(|(&t, &o)| Event { sample_index: t, label: "x".into(), offset: o })
            .collect();
        let inside: Vec<i64> = events
            .iter()
            .map(|ev| ev.sample_index as i64 + ev.offset - (p / 2) as i64)
            .filter(|&start| start >= 0 && start + p as i64 <= n_samples as i64)
            .collect();
        match epoch(&rec, &events, p) {
            Ok(ep) => {
                prop_assert_eq!(ep.trials.len(), inside.len());
                for (trial, &start) in ep.trials.iter().zip(&inside) {
                    prop_assert_eq!(trial.data.len(), 2 * p);
                    prop_assert_eq!(trial.data[0] as i64, start);
                    prop_assert_eq!(trial.data[p] as i64, start);
                }
            }
            Err(_) => prop_assert!(inside.is_empty()),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn one_over_f_similarity_ignores_channel_gain(
        gains in prop::collection::vec(0.01f64..100.0, 3),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..3).map(|_| pink_noise(4000, 250.0, 1.0, &mut rng)).collect();
        let scaled: Vec<Vec<f64>> = rows.iter().zip(&gains).map(|(r, g)| r.iter().map(|v| v * g).collect()).collect();
        let a = one_over_f_similarity(&Recording::from_rows(&rows, 250.0).unwrap()).unwrap();
        let b = one_over_f_similarity(&Recording::from_rows(&scaled, 250.0).unwrap()).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn snr_of_identical_inputs_is_infinite_and_residual_shift_free(
        seed in any::<u64>(),
        noise_gain in 0.01f64..2.0,
    ) {
        let x = gaussian_rows(&[10.0, 5.0], 300, seed);
        let n = gaussian_rows(&[noise_gain, noise_gain], 300, seed ^ 1);
        let rx = Recording::from_rows(&x, 100.0).unwrap();
        prop_assert_eq!(snr_db(&rx, &rx).unwrap(), f64::INFINITY);
        let noisy: Vec<Vec<f64>> = x.iter().zip(&n).map(|(a, b)| a.iter().zip(b).map(|(u, v)| u + v).collect()).collect();
        let rn = Recording::from_rows(&noisy, 100.0).unwrap();
        let direct = snr_db(&rn, &rx).unwrap();
        let power = |rows: &[Vec<f64>]| rows.iter().flatten().map(|v| v * v).sum::<f64>();
        let expected = 10.0 * (power(&x) / power(&n)).log10();
        prop_assert!((direct - expected).abs() < 1e-9);
    }
}
