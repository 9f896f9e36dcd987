mod support;

use gesture_core::inference::{accumulate_sliding_window, snippetwise_labels, upsample_prediction};
use gesture_core::metrics::{edit_score, segments_from_labels};
use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{noisy_stream, noisy_stream_truth, random_stream};

#[test]
fn zero_lookahead_is_snippetwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [1, 2, 17, 60] {
        for c in [1, 16, 32] {
            let s = random_stream(&mut rng, n, 5, c);
            assert_eq!(accumulate_sliding_window(&s, 0).unwrap(), snippetwise_labels(&s));
        }
    }
}

#[test]
fn window_suppresses_isolated_errors() {
    let s = noisy_stream();
    let truth = noisy_stream_truth();
    let k0 = accumulate_sliding_window(&s, 0).unwrap();
    let k15 = accumulate_sliding_window(&s, 15).unwrap();
    let (s0, s15, gt) = (
        segments_from_labels(&k0).unwrap(),
        segments_from_labels(&k15).unwrap(),
        segments_from_labels(&truth).unwrap(),
    );
    assert!(s15.len() < s0.len(), "{} vs {}", s15.len(), s0.len());
    assert!(edit_score(&s15, &gt).unwrap() > edit_score(&s0, &gt).unwrap());
}

#[test]
fn constant_one_hot_stream() {
    let mut col = Array2::zeros((10, 16));
    col.row_mut(7).fill(1.0);
    let s = support::random_stream(&mut ChaCha8Rng::seed_from_u64(0), 30, 10, 16);
    let s = gesture_core::inference::PredictionStream {
        scores: vec![col; s.len()],
        ..s
    };
    assert_eq!(accumulate_sliding_window(&s, 15).unwrap(), vec![7; 30]);
}

proptest! {
    #[test]
    fn accumulation_ignores_positive_scaling(seed in 0u64..1000, k in 0usize..16, scale in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_stream(&mut rng, 25, 4, 16);
        let mut scaled = s.clone();
        scaled.scores.iter_mut().for_each(|m| m.mapv_inplace(|v| v * scale));
        prop_assert_eq!(accumulate_sliding_window(&s, k).unwrap(), accumulate_sliding_window(&scaled, k).unwrap());
    }

    #[test]
    fn upsampled_columns_are_distributions(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_stream(&mut rng, 1, 6, 16);
        let u = upsample_prediction(&s.scores[0]);
        for col in u.columns() {
            prop_assert!((col.sum() - 1.0).abs() < 1e-12);
            prop_assert!(col.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn constant_prediction_upsamples_to_constant(v in prop::collection::vec(0.0f64..1.0, 5)) {
        let g = Array2::from_shape_fn((5, 16), |(c, _)| v[c]);
        let u = upsample_prediction(&g);
        for col in u.columns() {
            prop_assert_eq!(col.to_vec(), v.clone());
        }
    }
}
