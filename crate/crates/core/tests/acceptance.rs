//! Acceptance suite. Runs every criterion in order and prints one PASS/FAIL
//! line each; exits non-zero if any criterion fails.
//!
//! The end-to-end criterion trains reduced-width networks on a generated
//! dataset and takes several minutes on one CPU core.

mod support;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use gesture_core::data::{build_louo_folds, load_videos, Anchor, VideoData, VideoRecord};
use gesture_core::inference::{
    accumulate_sliding_window, predict_video, scored_pairs, snippetwise_labels, upsample_prediction,
};
use gesture_core::metrics::{
    average_f1, edit_score, frame_accuracy, segmental_f1, segments_from_labels, OverlapCriterion, F1_THRESHOLD,
};
use gesture_core::model::{
    build_network, inflate_kernel, load_external_pretrained, propagate_shapes, ArchConfig, ArchKind, DensePrediction,
    GestureModel, ModelParameters,
};
use gesture_core::nn::Conv3d;
use gesture_core::synth::{generate_dataset, SynthSpec};
use gesture_core::training::{loss_weights, snippet_frame_accuracy, train, weighted_ce_loss, TrainConfig, TrainLog};
use ndarray::{s, Array2, ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> Outcome;

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit: Duration) -> (bool, String) {
    (
        elapsed < limit,
        format!("{:.2}s (limit {:.0}s)", elapsed.as_secs_f64(), limit.as_secs_f64()),
    )
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut mismatches = 0;
    let instances = support::random_instances(1000, 2024);
    for (pred, gt, _) in &instances {
        let ps = segments_from_labels(pred).unwrap();
        let gs = segments_from_labels(gt).unwrap();
        if edit_score(&ps, &gs).unwrap() != support::edit_oracle(pred, gt) {
            mismatches += 1;
        }
        for (criterion, over_gt) in [
            (OverlapCriterion::Iou, false),
            (OverlapCriterion::OverGroundTruth, true),
        ] {
            if segmental_f1(&ps, &gs, F1_THRESHOLD, criterion).unwrap()
                != support::segmental_f1_oracle(pred, gt, F1_THRESHOLD, over_gt)
            {
                mismatches += 1;
            }
        }
    }
    let (fast, time) = within(start.elapsed(), Duration::from_secs(60));
    outcome(
        mismatches == 0 && fast,
        format!("{} instances, {mismatches} mismatches, {time}", instances.len()),
    )
}

fn metric_spot_values() -> Outcome {
    let seg = |c, a, b| gesture_core::metrics::LabelSegment {
        class: c,
        start: a,
        end: b,
    };
    let edit = edit_score(
        &[seg(1, 0, 1), seg(2, 2, 3), seg(1, 4, 5)],
        &[seg(1, 0, 2), seg(2, 3, 5)],
    )
    .unwrap();
    let f1 = segmental_f1(
        &[seg(1, 0, 99)],
        &[seg(1, 0, 49), seg(2, 50, 99)],
        F1_THRESHOLD,
        OverlapCriterion::Iou,
    )
    .unwrap();
    let avg = average_f1(&[1, 1, 1, 1], &[1, 1, 2, 2], 3).unwrap();
    let acc = frame_accuracy(&[1, 1, 2, 2], &[1, 2, 2, 2]).unwrap();
    let two_thirds = 200.0 / 3.0;
    let pass = (edit - two_thirds).abs() < 1e-12
        && (f1 - two_thirds).abs() < 1e-12
        && (avg - 100.0 / 3.0).abs() < 1e-12
        && acc == 75.0;
    outcome(
        pass,
        format!("edit {edit:.2}, F1@10 {f1:.2}, average F1 {avg:.2}, accuracy {acc:.2}"),
    )
}

fn shape_ledger() -> Outcome {
    let start = Instant::now();
    let arch = ArchConfig::dense3d(10);
    let rows = propagate_shapes(&arch.layer_specs().unwrap(), arch.input_shape()).unwrap();
    let got: Vec<Vec<usize>> = rows.iter().map(|r| r.shape.clone()).collect();
    let expect: Vec<Vec<usize>> = vec![
        vec![64, 16, 112, 112],
        vec![64, 16, 56, 56],
        vec![64, 16, 56, 56],
        vec![128, 8, 28, 28],
        vec![256, 4, 14, 14],
        vec![512, 2, 7, 7],
        vec![512, 2],
        vec![10, 16],
    ];
    // the instantiated network agrees with the symbolic ledger
    let net = build_network(&arch.layer_specs().unwrap(), 3).unwrap();
    let head = &net
        .param_specs()
        .into_iter()
        .find(|p| p.name == "head.weight")
        .unwrap()
        .shape;
    let (fast, time) = within(start.elapsed(), Duration::from_secs(1));
    outcome(
        got == expect && head == &[512, 10, 11] && fast,
        format!(
            "{} rows, head {head:?}, transposed length 2 -> {}, {time}",
            got.len(),
            got[7][1]
        ),
    )
}

fn loss_properties() -> Outcome {
    let start = Instant::now();
    let w = loss_weights(16);
    let sum: f64 = w.iter().sum();
    let w0_err = (w[0] - 256.0 / 1496.0).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_uniform = 0f64;
    for g in 2..=10 {
        let pred = DensePrediction {
            scores: Array2::from_elem((g, 16), 1.0 / g as f64),
            anchor_t: 0,
        };
        let labels: Vec<usize> = (0..16).map(|_| rng.random_range(0..g)).collect();
        worst_uniform = worst_uniform.max((weighted_ce_loss(&pred, &labels).unwrap() - (g as f64).ln()).abs());
    }
    let grad_err = support::tiny_stack_gradient_error(11);
    let (fast, time) = within(start.elapsed(), Duration::from_secs(60));
    outcome(
        sum == 1.0 && w0_err <= 1e-12 && worst_uniform <= 1e-9 && grad_err < 1e-3 && fast,
        format!(
            "sum(w) = {sum:?}, |w0 - 256/1496| = {w0_err:.1e}, uniform loss error {worst_uniform:.1e}, gradient rel. error {grad_err:.1e}, {time}"
        ),
    )
}

fn inflation_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let arch3d = ArchConfig::dense3d(10);
    let net = build_network(&arch3d.layer_specs().unwrap(), 3).unwrap();
    let mut worst = 0f64;
    let mut layers = 0;
    for conv in net.convs() {
        let n = conv.kernel[0];
        let [kh, kw] = [conv.kernel[1], conv.kernel[2]];
        let std = (2.0 / (conv.out_ch * kh * kw) as f64).sqrt();
        let w2 = ArrayD::from_shape_fn(IxDyn(&[conv.out_ch, conv.in_ch, 1, kh, kw]), |_| {
            (rng.random_range(-1.0..1.0) * std * 3f64.sqrt()) as f32
        });
        let w3 = inflate_kernel(&w2, n).unwrap().mapv(f64::from);
        let w2 = w2.mapv(f64::from);
        let frame = ArrayD::from_shape_fn(IxDyn(&[1, conv.in_ch, 1, 9, 9]), |_| rng.random_range(-1.0..1.0));
        let t_len = n + 2;
        let clip = ndarray::concatenate(ndarray::Axis(2), &vec![frame.view(); t_len]).unwrap();
        let spatial = [conv.padding[1], conv.padding[2]];
        let c2 = Conv3d::new(
            "c",
            conv.in_ch,
            conv.out_ch,
            [1, kh, kw],
            [1, conv.stride[1], conv.stride[2]],
            [0, spatial[0], spatial[1]],
        );
        let c3 = Conv3d::new(
            "c",
            conv.in_ch,
            conv.out_ch,
            conv.kernel,
            [1, conv.stride[1], conv.stride[2]],
            [conv.padding[0], spatial[0], spatial[1]],
        );
        let y2 = c2.forward(&w2, &frame).unwrap();
        let y3 = c3.forward(&w3, &clip).unwrap();
        // output frames whose temporal window lies inside the clip
        let pad = conv.padding[0];
        for t in (0..y3.shape()[2]).filter(|&t| t >= pad && t + n - pad <= t_len) {
            let diff = (&y3.slice(s![.., .., t..t + 1, .., ..]) - &y2).mapv(f64::abs);
            worst = worst.max(diff.fold(0.0, |a: f64, &b| a.max(b)));
        }
        layers += 1;
    }
    let (fast, time) = within(start.elapsed(), Duration::from_secs(60));
    outcome(
        worst <= 1e-5 && layers == 20 && fast,
        format!("{layers} convolutions, max |3D - 2D| = {worst:.1e}, {time}"),
    )
}

fn upsampling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_sum = 0f64;
    let mut worst_idx = 0f64;
    for _ in 0..100 {
        let g = rng.random_range(2..12);
        let s = support::random_stream(&mut rng, 1, g, 16);
        let p = &s.scores[0];
        let u = upsample_prediction(p);
        for col in u.columns() {
            worst_sum = worst_sum.max((col.sum() - 1.0).abs());
            if col.iter().any(|&v| v < 0.0) {
                worst_sum = f64::INFINITY;
            }
        }
        for c in 0..g {
            worst_idx = worst_idx
                .max((u[[c, 0]] - p[[c, 0]]).abs())
                .max((u[[c, 31]] - p[[c, 15]]).abs())
                .max((u[[c, 2]] - 0.5 * (p[[c, 0]] + p[[c, 1]])).abs());
        }
    }
    outcome(
        worst_sum < 1e-12 && worst_idx < 1e-12,
        format!("100 random predictions, column-sum error {worst_sum:.1e}, index identity error {worst_idx:.1e}"),
    )
}

fn sliding_window() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut same = true;
    for n in 1..40 {
        let s = support::random_stream(&mut rng, n, 1 + n % 6, 16);
        same &= accumulate_sliding_window(&s, 0).unwrap() == snippetwise_labels(&s);
    }
    let noisy = support::noisy_stream();
    let gt = segments_from_labels(&support::noisy_stream_truth()).unwrap();
    let k0 = segments_from_labels(&accumulate_sliding_window(&noisy, 0).unwrap()).unwrap();
    let k15 = segments_from_labels(&accumulate_sliding_window(&noisy, 15).unwrap()).unwrap();
    let (e0, e15) = (edit_score(&k0, &gt).unwrap(), edit_score(&k15, &gt).unwrap());
    outcome(
        same && k15.len() < k0.len() && e15 > e0,
        format!(
            "k=0 equals snippet-wise on 39 random streams: {same}; noisy stream segments {} -> {}, edit {e0:.2} -> {e15:.2}",
            k0.len(),
            k15.len()
        ),
    )
}

fn louo_check(spec: &SynthSpec) -> bool {
    let records: Vec<VideoRecord> = spec
        .plan()
        .unwrap()
        .into_iter()
        .map(|v| VideoRecord {
            video_id: v.video_id.clone(),
            subject_id: v.subject_id.clone(),
            frame_count_native: v.frame_count_native,
            native_fps: spec.native_fps,
            transcript: PathBuf::from(format!("{}.txt", v.video_id)),
            frame_dir: PathBuf::from(&v.video_id),
        })
        .collect();
    let folds = build_louo_folds(&records).unwrap();
    let mut ok = folds.len() == spec.n_subjects;
    let mut tested = Vec::new();
    for f in &folds {
        for r in &records {
            let held = r.subject_id == f.held_out_subject;
            // each video is in exactly one of the two sets, decided by its subject
            ok &= f.test_videos.contains(&r.video_id) == held && f.train_videos.contains(&r.video_id) == !held;
        }
        ok &= f.train_videos.len() + f.test_videos.len() == records.len();
        tested.extend(f.test_videos.iter().cloned());
    }
    tested.sort();
    let mut all: Vec<String> = records.iter().map(|r| r.video_id.clone()).collect();
    all.sort();
    ok && tested == all
}

fn louo_integrity() -> Outcome {
    let specs = [
        SynthSpec::default(),
        SynthSpec {
            seed: 1,
            ..SynthSpec::default()
        },
        SynthSpec {
            n_subjects: 8,
            videos_per_subject: 5,
            ..SynthSpec::default()
        },
    ];
    let ok = specs.iter().all(louo_check);
    outcome(
        ok,
        "2-subject manifests (seeds 0, 1) and an 8-subject, 40-video manifest: folds disjoint, covering, one per subject",
    )
}

/// Snippet-wise accuracy at 5 Hz on all frames, and on the frames of each
/// class group.
fn grouped_accuracy(model: &GestureModel, videos: &[&VideoData], groups: &[Vec<usize>]) -> (f64, Vec<f64>) {
    let (mut all_p, mut all_g) = (Vec::new(), Vec::new());
    for v in videos {
        let stream = predict_video(model, v, 5).unwrap();
        let (p, g) = scored_pairs(&stream, &snippetwise_labels(&stream));
        all_p.extend(p);
        all_g.extend(g);
    }
    let overall = frame_accuracy(&all_p, &all_g).unwrap();
    let per_group = groups
        .iter()
        .map(|classes| {
            let (p, g): (Vec<usize>, Vec<usize>) = all_p
                .iter()
                .zip(&all_g)
                .filter(|(_, g)| classes.contains(g))
                .map(|(p, g)| (*p, *g))
                .unzip();
            frame_accuracy(&p, &g).unwrap()
        })
        .collect();
    (overall, per_group)
}

fn non_monotone_epochs(log: &TrainLog, n: usize) -> usize {
    log.epochs
        .iter()
        .take(n)
        .collect::<Vec<_>>()
        .windows(2)
        .filter(|w| w[1].loss > w[0].loss)
        .count()
}

fn synthetic_end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        seed: 1,
        ..SynthSpec::default()
    };
    let ds = generate_dataset(&spec, dir.path(), false).unwrap();
    let num_classes = spec.num_classes;
    let base = TrainConfig {
        epochs: 45,
        batch_size: 16,
        snippets_per_epoch: 192,
        initial_lr: 2e-3,
        lr_decay_every: 30,
        base_width: 8,
        input_size: 32,
        seed: 0,
        ..TrainConfig::default()
    };
    let short_side = (base.input_size as f64 * 256.0 / 224.0).round() as u32;
    let videos = load_videos(&ds.manifest, &ds.vocab, 5, Some(short_side)).unwrap();
    let folds = build_louo_folds(&ds.manifest.records).unwrap();
    let fold = folds.iter().find(|f| f.held_out_subject == "B").unwrap();

    let run = |kind: ArchKind| -> (ModelParameters, TrainLog) {
        let config = TrainConfig {
            arch: kind,
            ..base.clone()
        };
        let init = GestureModel::new(config.arch_config(num_classes), config.seed)
            .unwrap()
            .params;
        train(&config, fold, &videos, init, None).unwrap()
    };
    let (p3, log3) = run(ArchKind::Dense3d);
    let (p2, _) = run(ArchKind::Frame2d);
    let m3 = GestureModel::from_parameters(p3).unwrap();
    let m2 = GestureModel::from_parameters(p2).unwrap();

    let train_videos: Vec<&VideoData> = videos
        .iter()
        .filter(|v| fold.train_videos.contains(&v.record.video_id))
        .collect();
    let anchors: Vec<Anchor> = train_videos
        .iter()
        .enumerate()
        .flat_map(|(i, v)| v.labels.labeled_frames().map(move |t| Anchor { video: i, t }))
        .collect();
    let train_acc = snippet_frame_accuracy(&m3, &train_videos, 5, &anchors).unwrap();

    let test_videos: Vec<&VideoData> = videos
        .iter()
        .filter(|v| fold.test_videos.contains(&v.record.video_id))
        .collect();
    let pairs = spec.motion_pair_classes();
    // pooled motion-coded frames first, then each pair
    let mut groups = vec![pairs.iter().flat_map(|&(a, b)| [a, b]).collect::<Vec<_>>()];
    groups.extend(pairs.iter().map(|&(a, b)| vec![a, b]));
    let (all3, acc3) = grouped_accuracy(&m3, &test_videos, &groups);
    let (all2, acc2) = grouped_accuracy(&m2, &test_videos, &groups);
    let (mot3, mot2) = (acc3[0], acc2[0]);
    let per_pair: Vec<String> = pairs
        .iter()
        .enumerate()
        .map(|(i, (a, b))| format!("pair ({a},{b}) {:.1} vs {:.1}", acc3[i + 1], acc2[i + 1]))
        .collect();
    let elapsed = start.elapsed();
    let (fast, time) = within(elapsed, Duration::from_secs(4 * 3600));
    outcome(
        train_acc >= 0.95 && mot3 - mot2 >= 10.0 && fast,
        format!(
            "3D training-snippet frame accuracy {:.1}%; held-out motion-coded frames 3D {mot3:.1}% vs 2D {mot2:.1}% ({}; all frames {all3:.1}% vs {all2:.1}%); loss rose in {} of the first 10 epochs; {time}",
            100.0 * train_acc,
            per_pair.join(", "),
            non_monotone_epochs(&log3, 10),
        ),
    )
}

/// Needs `GESTURE_JIGSAWS_MANIFEST`, `GESTURE_JIGSAWS_VOCAB` and
/// `GESTURE_PRETRAINED`; skipped otherwise.
fn jigsaws_full_scale() -> Option<Outcome> {
    let manifest = std::env::var_os("GESTURE_JIGSAWS_MANIFEST")?;
    let vocab = std::env::var_os("GESTURE_JIGSAWS_VOCAB")?;
    let pretrained = std::env::var_os("GESTURE_PRETRAINED")?;
    let manifest = gesture_core::data::Manifest::load(&PathBuf::from(manifest)).ok()?;
    let vocab = gesture_core::data::GestureVocabulary::parse(&std::fs::read_to_string(vocab).ok()?).ok()?;
    let videos = load_videos(&manifest, &vocab, 5, Some(256)).ok()?;
    let config = TrainConfig::default();
    let mut accs = Vec::new();
    for fold in build_louo_folds(&manifest.records).ok()? {
        let init = load_external_pretrained(&PathBuf::from(&pretrained), &config.arch_config(vocab.len()), 0).ok()?;
        let (params, _) = train(&config, &fold, &videos, init, None).ok()?;
        let model = GestureModel::from_parameters(params).ok()?;
        let mut fold_acc = Vec::new();
        for v in videos.iter().filter(|v| fold.test_videos.contains(&v.record.video_id)) {
            let stream = predict_video(&model, v, 5).ok()?;
            let (p, g) = scored_pairs(&stream, &accumulate_sliding_window(&stream, 15).ok()?);
            fold_acc.push(frame_accuracy(&p, &g).ok()?);
        }
        accs.extend(fold_acc);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    Some(outcome(
        (mean - 84.2).abs() <= 2.0,
        format!("mean frame accuracy {mean:.2}% (target 84.2 ± 2)"),
    ))
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("metric oracle equivalence", metric_oracles),
        ("metric spot values", metric_spot_values),
        ("shape ledger", shape_ledger),
        ("loss properties", loss_properties),
        ("inflation identity", inflation_identity),
        ("upsampling", upsampling),
        ("sliding window", sliding_window),
        ("LOUO integrity", louo_integrity),
        ("synthetic end-to-end", synthetic_end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        failed += usize::from(!o.pass);
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    match jigsaws_full_scale() {
        Some(o) => {
            failed += usize::from(!o.pass);
            println!(
                "{} JIGSAWS full scale (optional): {}",
                if o.pass { "PASS" } else { "FAIL" },
                o.detail
            );
        }
        None => println!("SKIP JIGSAWS full scale (optional): dataset and pretrained parameters not supplied"),
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
