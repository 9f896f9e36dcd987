//! Brute-force reference implementations and constructed instances shared by
//! the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use gesture_core::inference::PredictionStream;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Collapses consecutive duplicates.
pub fn segment_string(labels: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &l in labels {
        if out.last() != Some(&l) {
            out.push(l);
        }
    }
    out
}

/// Segments as (class, set of frames).
pub fn segment_frames(labels: &[usize]) -> Vec<(usize, Vec<usize>)> {
    let mut out: Vec<(usize, Vec<usize>)> = Vec::new();
    for (t, &l) in labels.iter().enumerate() {
        match out.last_mut() {
            Some((c, frames)) if *c == l => frames.push(t),
            _ => out.push((l, vec![t])),
        }
    }
    out
}

/// Textbook recursive Levenshtein distance with memoisation.
pub fn levenshtein_oracle(a: &[usize], b: &[usize]) -> usize {
    fn go(a: &[usize], b: &[usize], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == 0 {
            return j;
        }
        if j == 0 {
            return i;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = (go(a, b, i - 1, j, memo) + 1)
            .min(go(a, b, i, j - 1, memo) + 1)
            .min(go(a, b, i - 1, j - 1, memo) + usize::from(a[i - 1] != b[j - 1]));
        memo.insert((i, j), v);
        v
    }
    go(a, b, a.len(), b.len(), &mut HashMap::new())
}

pub fn edit_oracle(pred: &[usize], gt: &[usize]) -> f64 {
    let (p, g) = (segment_string(pred), segment_string(gt));
    let d = levenshtein_oracle(&p, &g) as f64;
    (100.0 * (1.0 - d / p.len().max(g.len()) as f64)).max(0.0)
}

fn overlap(p: &[usize], g: &[usize], over_gt: bool) -> f64 {
    let inter = p.iter().filter(|t| g.contains(t)).count();
    let union = p.len() + g.len() - inter;
    if over_gt {
        inter as f64 / g.len() as f64
    } else {
        inter as f64 / union as f64
    }
}

/// Largest number of disjoint (prediction, ground truth) pairs of equal class
/// with overlap above `tau`, by trying every assignment.
pub fn max_matches(pred: &[(usize, Vec<usize>)], gt: &[(usize, Vec<usize>)], tau: f64, over_gt: bool) -> usize {
    fn go(
        i: usize,
        pred: &[(usize, Vec<usize>)],
        gt: &[(usize, Vec<usize>)],
        used: &mut Vec<bool>,
        tau: f64,
        over_gt: bool,
    ) -> usize {
        if i == pred.len() {
            return 0;
        }
        let mut best = go(i + 1, pred, gt, used, tau, over_gt);
        for j in 0..gt.len() {
            if !used[j] && gt[j].0 == pred[i].0 && overlap(&pred[i].1, &gt[j].1, over_gt) > tau {
                used[j] = true;
                best = best.max(1 + go(i + 1, pred, gt, used, tau, over_gt));
                used[j] = false;
            }
        }
        best
    }
    go(0, pred, gt, &mut vec![false; gt.len()], tau, over_gt)
}

pub fn segmental_f1_oracle(pred: &[usize], gt: &[usize], tau: f64, over_gt: bool) -> f64 {
    let (p, g) = (segment_frames(pred), segment_frames(gt));
    let tp = max_matches(&p, &g, tau, over_gt);
    let denom = p.len() + g.len();
    100.0 * 2.0 * tp as f64 / denom as f64
}

/// Random label sequence with runs, length `t`, classes `0..g`.
pub fn random_labels(rng: &mut ChaCha8Rng, t: usize, g: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(t);
    let mut cur = rng.random_range(0..g);
    for _ in 0..t {
        if rng.random_bool(0.3) {
            cur = rng.random_range(0..g);
        }
        out.push(cur);
    }
    out
}

/// `n` random instances with `T ≤ 30`, `G ≤ 4`; half of the predictions are
/// perturbations of the ground truth.
pub fn random_instances(n: usize, seed: u64) -> Vec<(Vec<usize>, Vec<usize>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let t = rng.random_range(1..=30);
            let g = rng.random_range(1..=4);
            let gt = random_labels(&mut rng, t, g);
            let pred = if i % 2 == 0 {
                random_labels(&mut rng, t, g)
            } else {
                gt.iter()
                    .map(|&l| {
                        if rng.random_bool(0.15) {
                            rng.random_range(0..g)
                        } else {
                            l
                        }
                    })
                    .collect()
            };
            (pred, gt, g)
        })
        .collect()
}

/// Ground truth of the constructed noisy stream: four 25-frame segments.
pub fn noisy_stream_truth() -> Vec<usize> {
    (0..100).map(|t| t / 25).collect()
}

/// Dense predictions that put 0.7 on the true class of every covered frame,
/// except at every fifth anchor (20%), whose whole prediction favours the
/// next class instead.
pub fn noisy_stream() -> PredictionStream {
    let truth = noisy_stream_truth();
    let (g, c) = (4, 16);
    let scores = (0..truth.len())
        .map(|t| {
            let corrupt = t % 5 == 2;
            Array2::from_shape_fn((g, c), |(k, col)| {
                let frame = (t + col).saturating_sub(c - 1);
                let mut target = truth[frame];
                if corrupt {
                    target = (truth[t] + 1) % g;
                }
                if k == target {
                    0.7
                } else {
                    0.1
                }
            })
        })
        .collect();
    PredictionStream {
        video_id: "noisy".into(),
        eval_fps: 5,
        labeled_start: 0,
        scores,
        gt: truth.iter().map(|&l| Some(l)).collect(),
    }
}

/// Random stream of `n` anchors with `G × C` column-stochastic scores.
pub fn random_stream(rng: &mut ChaCha8Rng, n: usize, g: usize, c: usize) -> PredictionStream {
    let scores = (0..n)
        .map(|_| {
            let mut s = Array2::from_shape_fn((g, c), |_| rng.random_range(0.0..1.0f64));
            for mut col in s.columns_mut() {
                let z = col.sum();
                col.mapv_inplace(|v| v / z);
            }
            s
        })
        .collect();
    PredictionStream {
        video_id: "random".into(),
        eval_fps: 5,
        labeled_start: 0,
        scores,
        gt: vec![Some(0); n],
    }
}

/// Two convolutions (stem and one residual stage) plus the transposed head,
/// 8×8 input, 4 frames.
pub fn tiny_stack() -> Vec<gesture_core::model::LayerSpec> {
    use gesture_core::model::{LayerKind, LayerSpec};
    let l = |kind, kernel, stride, padding, out_channels| LayerSpec {
        kind,
        kernel,
        stride,
        padding,
        out_channels,
        repeat: 1,
    };
    vec![
        l(LayerKind::Conv, [3, 3, 3], [1, 2, 2], [1, 1, 1], 3),
        l(LayerKind::ResidualStage, [3, 3, 3], [2, 2, 2], [1, 1, 1], 4),
        l(LayerKind::AvgPool, [1, 2, 2], [1, 1, 1], [0, 0, 0], 4),
        l(LayerKind::TransposedConv1d, [2, 1, 1], [2, 1, 1], [0, 0, 0], 3),
    ]
}

/// Worst relative error between backpropagated gradients of the weighted
/// training loss and central finite differences, over a sample of entries of
/// every parameter of [`tiny_stack`] (f64 throughout).
pub fn tiny_stack_gradient_error(seed: u64) -> f64 {
    use gesture_core::model::build_network;
    use gesture_core::nn::{Mode, ParamStore};
    use gesture_core::training::weighted_ce_with_grad;
    use ndarray::{ArrayD, Ix3, IxDyn};

    let net = build_network(&tiny_stack(), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = net.init_params::<f64, _>(&mut rng);
    // move batch-norm affine terms off 1/0 so their gradients are exercised
    for (k, v) in params.params.iter_mut() {
        if k.contains("bn") {
            v.mapv_inplace(|x| x + rng.random_range(-0.3..0.3));
        }
    }
    let x = ArrayD::from_shape_fn(IxDyn(&[2, 2, 4, 8, 8]), |_| rng.random_range(-1.0..1.0));
    let labels: Vec<Vec<usize>> = (0..2)
        .map(|_| (0..4).map(|_| rng.random_range(0..3)).collect())
        .collect();
    let loss = |p: &ParamStore<f64>| -> f64 {
        let y = net
            .infer(p, x.clone(), Mode::Train)
            .unwrap()
            .into_dimensionality::<Ix3>()
            .unwrap();
        weighted_ce_with_grad(&y, &labels).unwrap().0
    };
    let (y, tape) = net.forward(&params, x.clone(), Mode::Train).unwrap();
    let (_, dy) = weighted_ce_with_grad(&y.into_dimensionality::<Ix3>().unwrap(), &labels).unwrap();
    let (_, grads) = net.backward(&params, &tape, dy.into_dyn()).unwrap();

    let h = 1e-5;
    let mut worst = 0f64;
    let names: Vec<String> = params.params.keys().cloned().collect();
    for name in names {
        let len = params.params[&name].len();
        for k in 0..len.min(8) {
            let idx = (k * 7919) % len;
            let set =
                |p: &mut ParamStore<f64>, v: f64| p.params.get_mut(&name).unwrap().as_slice_mut().unwrap()[idx] = v;
            let orig = params.params[&name].as_slice().unwrap()[idx];
            set(&mut params, orig + h);
            let up = loss(&params);
            set(&mut params, orig - h);
            let down = loss(&params);
            set(&mut params, orig);
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads[&name].as_slice().unwrap()[idx];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}
