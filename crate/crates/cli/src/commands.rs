use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context as _, Result};
use gesture_core::data::{
    build_louo_folds, load_videos, FoldSpec, FrameTransform, GestureVocabulary, Manifest, VideoData, VideoRecord,
};
use gesture_core::inference::{
    accumulate_sliding_window, load_label_file, load_score_dump, predict_video, render_label_file, save_score_dump,
    scored_pairs, snippetwise_labels, PredictionStream,
};
use gesture_core::metrics::{
    aggregate_report, evaluate_labels, MeanMetrics, MetricsReport, OverlapCriterion, VideoMetrics,
};
use gesture_core::model::{
    inflate_weights, load_checkpoint, load_external_pretrained, ArchConfig, ArchKind, GestureModel, ModelParameters,
};
use gesture_core::nn::Mode;
use gesture_core::synth::{generate_dataset, SynthSpec};
use gesture_core::training::{self, InitMode, TrainConfig};
use ndarray::Array5;
use serde_json::json;

use crate::plot::{legend_svg, ribbons_svg};
use crate::run::{write_atomic, Run};
use crate::{
    BenchArgs, CrossvalArgs, EvalOptions, EvaluateArgs, Method, PlotArgs, PredictArgs, PrepareArgs, SweepArgs,
    SynthArgs, TrainArgs, Usage,
};

pub struct Context {
    pub runs_dir: PathBuf,
    pub run_id: Option<String>,
}

impl Context {
    fn run(&self, command: &str) -> Result<Run> {
        Run::create(&self.runs_dir, command, self.run_id.as_deref())
    }
}

fn finish(run: Run) -> Result<()> {
    let dir = run.finish()?;
    println!("outputs in {}", dir.display());
    Ok(())
}

/// Leading letters of the last `_`-separated token: `Suturing_B001` is subject `B`.
fn subject_of(video_id: &str) -> Option<String> {
    let (_, token) = video_id.rsplit_once('_')?;
    let subject: String = token.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    (!subject.is_empty()).then_some(subject)
}

fn count_frames(dir: &Path) -> Result<usize> {
    let entries = fs::read_dir(dir).map_err(|source| gesture_core::Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut n = 0;
    for entry in entries {
        let path = entry?.path();
        if matches!(path.extension().and_then(|e| e.to_str()), Some("png" | "jpg")) {
            n += 1;
        }
    }
    Ok(n)
}

pub fn prepare(ctx: &Context, args: PrepareArgs) -> Result<()> {
    let mut run = ctx.run("prepare")?;
    let root = fs::canonicalize(&args.data_root).map_err(|source| gesture_core::Error::Io {
        path: args.data_root.clone(),
        source,
    })?;
    let vocab = match &args.vocab {
        Some(path) => {
            GestureVocabulary::parse(&fs::read_to_string(path).map_err(|source| gesture_core::Error::Io {
                path: path.clone(),
                source,
            })?)?
        }
        None => GestureVocabulary::jigsaws_suturing(),
    };
    let transcripts = root.join(&args.transcripts);
    let mut files: Vec<PathBuf> = fs::read_dir(&transcripts)
        .map_err(|source| gesture_core::Error::Io {
            path: transcripts.clone(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    files.sort();
    let mut records = Vec::new();
    for transcript in files {
        let video_id = transcript
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let subject_id = subject_of(&video_id)
            .ok_or_else(|| gesture_core::Error::format(&video_id, "cannot derive a subject from the video id"))?;
        let frame_dir = root.join(&args.frames).join(&video_id);
        let frame_count_native = count_frames(&frame_dir)?;
        if frame_count_native == 0 {
            return Err(gesture_core::Error::format(frame_dir.display().to_string(), "no frames").into());
        }
        // parse now so a bad transcript fails here rather than at training time
        let text = fs::read_to_string(&transcript)?;
        gesture_core::data::parse_transcript(&text, &vocab)
            .with_context(|| format!("parsing {}", transcript.display()))?;
        records.push(VideoRecord {
            video_id,
            subject_id,
            frame_count_native,
            native_fps: args.native_fps,
            transcript,
            frame_dir,
        });
    }
    if records.is_empty() {
        return Err(gesture_core::Error::format(transcripts.display().to_string(), "no transcripts found").into());
    }
    let manifest = Manifest { records };
    let subjects = build_louo_folds(&manifest.records)?.len();
    write_atomic(&run.path("manifest.tsv"), manifest.render())?;
    write_atomic(&run.path("vocab.tsv"), vocab.render())?;
    log::info!("{} videos from {subjects} subjects", manifest.records.len());
    run.set("videos", json!(manifest.records.len()));
    run.set("subjects", json!(subjects));
    finish(run)
}

pub fn synth(ctx: &Context, args: SynthArgs) -> Result<()> {
    let mut run = ctx.run("synth")?;
    let d = SynthSpec::default();
    let spec = SynthSpec {
        n_subjects: args.n_subjects.unwrap_or(d.n_subjects),
        videos_per_subject: args.videos_per_subject.unwrap_or(d.videos_per_subject),
        num_classes: args.num_classes.unwrap_or(d.num_classes),
        motion_pairs: args.motion_pairs.unwrap_or(d.motion_pairs),
        native_fps: args.native_fps.unwrap_or(d.native_fps),
        working_fps: args.working_fps.unwrap_or(d.working_fps),
        segments_per_video: args.segments_per_video.unwrap_or(d.segments_per_video),
        mean_segment_len: args.mean_segment_len.unwrap_or(d.mean_segment_len),
        segment_jitter: args.segment_jitter.unwrap_or(d.segment_jitter),
        frame_size: args.frame_size.unwrap_or(d.frame_size),
        speed: args.speed.unwrap_or(d.speed),
        seed: args.seed.unwrap_or(d.seed),
    };
    if let Err(e) = spec.validate() {
        return Err(Usage(e.to_string()).into());
    }
    let out = args.out.unwrap_or_else(|| run.path("data"));
    let ds = generate_dataset(&spec, &out, args.overwrite)?;
    println!("{} videos written to {}", ds.manifest.records.len(), ds.root.display());
    run.set("dataset", json!(ds.root));
    run.set("spec", serde_json::to_value(&spec)?);
    finish(run)
}

fn load_data(data: &crate::DataArgs, config: &TrainConfig) -> Result<(Manifest, GestureVocabulary, Vec<VideoData>)> {
    let manifest = data.manifest()?;
    let vocab = data.vocabulary()?;
    let short_side = FrameTransform::with_size(config.input_size as u32).load_short_side();
    let videos = load_videos(&manifest, &vocab, config.working_fps, Some(short_side))?;
    Ok((manifest, vocab, videos))
}

fn initial_parameters(config: &TrainConfig, arch: &ArchConfig) -> Result<ModelParameters> {
    let pretrained = || {
        config
            .pretrained
            .as_deref()
            .ok_or_else(|| Usage("pretrained file required".into()))
    };
    Ok(match config.init_mode {
        InitMode::Random => GestureModel::new(arch.clone(), config.seed)?.params,
        InitMode::Inflate => {
            let source = load_checkpoint(pretrained()?)?;
            inflate_weights(&source.store, arch, config.seed)?
        }
        InitMode::External => load_external_pretrained(pretrained()?, arch, config.seed)?,
    })
}

fn fold_for(manifest: &Manifest, holdout: Option<&str>) -> Result<FoldSpec> {
    match holdout {
        None => Ok(FoldSpec {
            held_out_subject: String::new(),
            train_videos: manifest.records.iter().map(|r| r.video_id.clone()).collect(),
            test_videos: Vec::new(),
        }),
        Some(subject) => build_louo_folds(&manifest.records)?
            .into_iter()
            .find(|f| f.held_out_subject == subject)
            .ok_or_else(|| Usage(format!("no subject `{subject}` in the manifest")).into()),
    }
}

fn fold_json(fold: &FoldSpec) -> serde_json::Value {
    json!({ "held_out_subject": fold.held_out_subject, "train": fold.train_videos, "test": fold.test_videos })
}

pub fn train(ctx: &Context, args: TrainArgs) -> Result<()> {
    let config = args.config.build()?;
    let mut run = ctx.run("train")?;
    write_atomic(&run.path("config.txt"), config.render())?;
    run.set("config", serde_json::to_value(&config)?);
    run.set("seed", json!(config.seed));
    let (manifest, vocab, videos) = load_data(&args.data, &config)?;
    let fold = fold_for(&manifest, args.holdout.as_deref())?;
    run.set("fold", fold_json(&fold));
    let init = initial_parameters(&config, &config.arch_config(vocab.len()))?;
    let start = Instant::now();
    let (_, log) = training::train(&config, &fold, &videos, init, Some(&run.dir))?;
    run.set("train_seconds", json!(start.elapsed().as_secs_f64()));
    let checkpoints: Vec<_> = log.epochs.iter().filter_map(|e| e.checkpoint.clone()).collect();
    run.set("checkpoints", json!(checkpoints));
    run.set("model", json!(run.path("model.ckpt")));
    if let Some(last) = log.epochs.last() {
        println!(
            "epoch {}: loss {:.4}, training accuracy {:.3}",
            last.epoch, last.loss, last.train_accuracy
        );
    }
    finish(run)
}

fn default_lookahead(stream: &PredictionStream, requested: Option<usize>) -> usize {
    let k = requested.unwrap_or(3 * stream.eval_fps as usize);
    k.min(stream.max_lookahead())
}

fn method_labels(stream: &PredictionStream, method: Method, lookahead: Option<usize>) -> Result<Vec<usize>> {
    Ok(match method {
        Method::Snippet => snippetwise_labels(stream),
        Method::Window => accumulate_sliding_window(stream, default_lookahead(stream, lookahead))?,
    })
}

fn score(fold: &str, stream: &PredictionStream, pred: &[usize], criterion: OverlapCriterion) -> Result<VideoMetrics> {
    let (p, g) = scored_pairs(stream, pred);
    Ok(evaluate_labels(
        fold,
        &stream.video_id,
        &p,
        &g,
        stream.num_classes(),
        criterion,
    )?)
}

/// Dump, label files and both evaluations for one video.
struct Predicted {
    snippet: VideoMetrics,
    window: VideoMetrics,
}

fn predict_one(
    model: &GestureModel,
    video: &VideoData,
    eval: EvalOptions,
    fold: &str,
    out: &Path,
    vocab: &GestureVocabulary,
) -> Result<Predicted> {
    let stream = predict_video(model, video, eval.fps)?;
    save_score_dump(&out.join("scores").join(format!("{}.gst", stream.video_id)), &stream)?;
    let snippet = snippetwise_labels(&stream);
    let window = method_labels(&stream, Method::Window, eval.lookahead)?;
    let labels = out.join("labels");
    let (s, g) = scored_pairs(&stream, &snippet);
    let (w, _) = scored_pairs(&stream, &window);
    for (suffix, values) in [("gt", &g), ("snippet", &s), ("window", &w)] {
        write_atomic(
            &labels.join(format!("{}.{suffix}.txt", stream.video_id)),
            render_label_file(values, vocab),
        )?;
    }
    let criterion = eval.overlap.into();
    Ok(Predicted {
        snippet: score(fold, &stream, &snippet, criterion)?,
        window: score(fold, &stream, &window, criterion)?,
    })
}

pub fn predict(ctx: &Context, args: PredictArgs) -> Result<()> {
    let params = load_checkpoint(&args.model)?;
    let model = GestureModel::from_parameters(params)?;
    let arch = model.arch().clone();
    let manifest = args.data.manifest()?;
    let vocab = args.data.vocabulary()?;
    if vocab.len() != arch.num_classes {
        return Err(Usage(format!(
            "model has {} classes, vocabulary {}",
            arch.num_classes,
            vocab.len()
        ))
        .into());
    }
    let wanted: Vec<String> = match &args.holdout {
        Some(subject) => fold_for(&manifest, Some(subject))?.test_videos,
        None if args.video.is_empty() => manifest.records.iter().map(|r| r.video_id.clone()).collect(),
        None => args.video.clone(),
    };
    let subset = Manifest {
        records: wanted
            .iter()
            .map(|id| {
                manifest
                    .get(id)
                    .cloned()
                    .ok_or_else(|| gesture_core::Error::UnknownVideo(id.clone()))
            })
            .collect::<Result<_, _>>()?,
    };
    let short_side = FrameTransform::with_size(arch.input_size as u32).load_short_side();
    let videos = load_videos(&subset, &vocab, 5, Some(short_side))?;
    let mut run = ctx.run("predict")?;
    run.set("model", json!(args.model));
    let fold = args.holdout.clone().unwrap_or_else(|| "predict".into());
    let (mut snippet, mut window) = (Vec::new(), Vec::new());
    for video in &videos {
        let start = Instant::now();
        let p = predict_one(&model, video, args.eval, &fold, &run.dir, &vocab)?;
        log::info!("{}: {:.1}s", video.id(), start.elapsed().as_secs_f64());
        snippet.push(p.snippet);
        window.push(p.window);
    }
    for (name, rows) in [("snippet", snippet), ("window", window)] {
        let report = aggregate_report(rows)?;
        write_report(&mut run, name, &report)?;
        println!("{name}\n{}", report.to_table());
    }
    finish(run)
}

fn write_report(run: &mut Run, name: &str, report: &MetricsReport) -> Result<()> {
    let csv = run.path(&format!("{name}.csv"));
    write_atomic(&csv, report.to_csv())?;
    write_atomic(
        &run.path(&format!("{name}.json")),
        serde_json::to_string_pretty(report)? + "\n",
    )?;
    run.push("reports", json!(csv));
    Ok(())
}

/// Expands directories to their `.gst` files, sorted.
fn dump_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "gst"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(path.clone());
        }
    }
    if out.is_empty() {
        return Err(Usage("no score dumps given".into()).into());
    }
    Ok(out)
}

fn load_dumps(paths: &[PathBuf]) -> Result<Vec<PredictionStream>> {
    dump_paths(paths)?.iter().map(|p| Ok(load_score_dump(p)?)).collect()
}

pub fn evaluate(ctx: &Context, args: EvaluateArgs) -> Result<()> {
    let criterion: OverlapCriterion = args.overlap.into();
    let rows = if !args.scores.is_empty() {
        let streams = load_dumps(&args.scores)?;
        streams
            .iter()
            .map(|s| {
                score(
                    &args.fold,
                    s,
                    &method_labels(s, args.method, args.lookahead)?,
                    criterion,
                )
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        if args.pred.is_empty() || args.pred.len() != args.gt.len() {
            return Err(Usage("give --scores, or matching numbers of --pred and --gt files".into()).into());
        }
        let vocab = args.data.vocabulary()?;
        args.pred
            .iter()
            .zip(&args.gt)
            .map(|(p, g)| {
                let pred = load_label_file(p, &vocab)?;
                let gt = load_label_file(g, &vocab)?;
                let id = g.file_stem().unwrap_or_default().to_string_lossy();
                let id = id.strip_suffix(".gt").unwrap_or(&id);
                Ok(evaluate_labels(&args.fold, id, &pred, &gt, vocab.len(), criterion)?)
            })
            .collect::<Result<Vec<_>>>()?
    };
    let report = aggregate_report(rows)?;
    let mut run = ctx.run("evaluate")?;
    write_report(&mut run, "metrics", &report)?;
    print!("{}", report.to_table());
    finish(run)
}

fn method_name(config: &TrainConfig) -> String {
    match (config.arch, config.init_mode) {
        (ArchKind::Frame2d, _) => "2D CNN".into(),
        (ArchKind::Dense3d, InitMode::Random) => "3D CNN (scratch)".into(),
        (ArchKind::Dense3d, InitMode::Inflate) => "3D CNN (inflated)".into(),
        (ArchKind::Dense3d, InitMode::External) => "3D CNN (pretrained)".into(),
    }
}

fn mean_row(s: &mut String, name: &str, means: &[MeanMetrics]) {
    let n = means.len() as f64;
    let avg = |f: fn(&MeanMetrics) -> f64| means.iter().map(f).sum::<f64>() / n;
    let _ = writeln!(
        s,
        "{name},{:.4},{:.4},{:.4},{:.4}",
        avg(|m| m.accuracy),
        avg(|m| m.average_f1),
        avg(|m| m.edit),
        avg(|m| m.f1_at_10)
    );
}

pub fn crossval(ctx: &Context, args: CrossvalArgs) -> Result<()> {
    let config = args.config.build()?;
    if args.repetitions == 0 {
        return Err(Usage("repetitions must be at least 1".into()).into());
    }
    let (manifest, vocab, videos) = load_data(&args.data, &config)?;
    let mut folds = build_louo_folds(&manifest.records)?;
    if !args.holdout.is_empty() {
        for s in &args.holdout {
            if !folds.iter().any(|f| &f.held_out_subject == s) {
                return Err(Usage(format!("no subject `{s}` in the manifest")).into());
            }
        }
        folds.retain(|f| args.holdout.contains(&f.held_out_subject));
    }
    let mut run = ctx.run("crossval")?;
    write_atomic(&run.path("config.txt"), config.render())?;
    run.set("config", serde_json::to_value(&config)?);
    run.set("repetitions", json!(args.repetitions));
    let arch = config.arch_config(vocab.len());
    let (mut snippet_means, mut window_means) = (Vec::new(), Vec::new());
    for rep in 0..args.repetitions {
        let rep_config = TrainConfig {
            seed: config.seed + rep,
            ..config.clone()
        };
        let (mut snippet, mut window) = (Vec::new(), Vec::new());
        for fold in &folds {
            let dir = run.path(&format!("rep{rep}/{}", fold.held_out_subject));
            let start = Instant::now();
            let init = initial_parameters(&rep_config, &arch)?;
            let (params, _) = training::train(&rep_config, fold, &videos, init, Some(&dir))?;
            let train_seconds = start.elapsed().as_secs_f64();
            let model = GestureModel::from_parameters(params)?;
            for id in &fold.test_videos {
                let video = videos
                    .iter()
                    .find(|v| v.id() == id)
                    .expect("fold videos come from the manifest");
                let p = predict_one(&model, video, args.eval, &fold.held_out_subject, &dir, &vocab)?;
                snippet.push(p.snippet);
                window.push(p.window);
            }
            log::info!(
                "repetition {rep}, held out {}: {train_seconds:.0}s training",
                fold.held_out_subject
            );
            run.push(
                "folds",
                json!({
                    "repetition": rep,
                    "seed": rep_config.seed,
                    "fold": fold_json(fold),
                    "checkpoint": dir.join("model.ckpt"),
                    "train_seconds": train_seconds,
                }),
            );
        }
        let snippet = aggregate_report(snippet)?;
        let window = aggregate_report(window)?;
        write_report(&mut run, &format!("rep{rep}/snippet"), &snippet)?;
        write_report(&mut run, &format!("rep{rep}/window"), &window)?;
        snippet_means.push(snippet.mean);
        window_means.push(window.mean);
    }
    let name = method_name(&config);
    let mut summary = String::from("method,accuracy,average_f1,edit,f1_at_10\n");
    mean_row(&mut summary, &name, &snippet_means);
    if arch.output_len() > 1 {
        mean_row(&mut summary, &format!("{name} + window"), &window_means);
    }
    write_atomic(&run.path("summary.csv"), &summary)?;
    print!("{summary}");
    finish(run)
}

pub fn sweep(ctx: &Context, args: SweepArgs) -> Result<()> {
    let streams = load_dumps(&args.scores)?;
    let criterion: OverlapCriterion = args.overlap.into();
    let limit = streams.iter().map(PredictionStream::max_lookahead).min().unwrap_or(0);
    let max_k = args.max_lookahead.unwrap_or(limit);
    if max_k > limit {
        return Err(Usage(format!("look-ahead {max_k} exceeds what the dumps allow ({limit})")).into());
    }
    let mut table = String::from("k,accuracy,average_f1,edit,f1_at_10\n");
    for k in 0..=max_k {
        let rows = streams
            .iter()
            .map(|s| score("sweep", s, &accumulate_sliding_window(s, k)?, criterion))
            .collect::<Result<Vec<_>>>()?;
        let m = aggregate_report(rows)?.mean;
        let _ = writeln!(
            table,
            "{k},{:.4},{:.4},{:.4},{:.4}",
            m.accuracy, m.average_f1, m.edit, m.f1_at_10
        );
    }
    let mut run = ctx.run("sweep")?;
    write_atomic(&run.path("sweep.csv"), &table)?;
    run.set("dumps", json!(streams.len()));
    print!("{table}");
    finish(run)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn bench(ctx: &Context, args: BenchArgs) -> Result<()> {
    if args.n == 0 || args.batch == 0 {
        return Err(Usage("n and batch must be positive".into()).into());
    }
    let model = match &args.model {
        Some(path) => GestureModel::from_parameters(load_checkpoint(path)?)?,
        None => {
            let mut config = TrainConfig::default();
            config.set("arch", &args.arch)?;
            config.base_width = args.base_width;
            config.input_size = args.input_size;
            GestureModel::new(config.arch_config(args.classes), 0)?
        }
    };
    let [c, t, h, w] = model.arch().input_shape();
    let x = Array5::from_shape_fn((args.batch, c, t, h, w), |(b, c, t, y, x)| {
        (((b + 3 * c + 5 * t + 7 * y + 11 * x) % 17) as f32 - 8.0) / 8.0
    });
    for _ in 0..args.warmup {
        model.logits(x.clone(), Mode::Eval)?;
    }
    let mut times = Vec::with_capacity(args.n);
    let mut out_shape = Vec::new();
    for _ in 0..args.n {
        let input = x.clone();
        let start = Instant::now();
        let y = model.logits(input, Mode::Eval)?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
        out_shape = y.shape()[1..].to_vec();
    }
    let (mean, std) = mean_std(&times);
    let shape = out_shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" × ");
    println!(
        "{}: input {c} × {t} × {h} × {w}, output {shape}",
        model.arch().arch_id()
    );
    println!("batch {}: {mean:.2} ± {std:.2} ms over {} passes", args.batch, args.n);
    let mut run = ctx.run("bench")?;
    let result = json!({
        "arch": model.arch().arch_id(),
        "input": [c, t, h, w],
        "output": out_shape,
        "batch": args.batch,
        "n": args.n,
        "mean_ms": mean,
        "std_ms": std,
    });
    write_atomic(&run.path("bench.json"), serde_json::to_string_pretty(&result)? + "\n")?;
    run.set("bench", result);
    finish(run)
}

pub fn plot(ctx: &Context, args: PlotArgs) -> Result<()> {
    let vocab = args.data.vocabulary()?;
    let mut plots: Vec<(String, Vec<(String, PathBuf)>)> = Vec::new();
    if let Some(dir) = &args.labels_dir {
        let labels = dir.join("labels");
        let mut gts: Vec<PathBuf> = fs::read_dir(&labels)
            .map_err(|source| gesture_core::Error::Io {
                path: labels.clone(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".gt.txt"))
            .collect();
        gts.sort();
        for gt in gts {
            let name = gt.file_name().unwrap_or_default().to_string_lossy();
            let id = name.trim_end_matches(".gt.txt").to_string();
            let rows = ["gt", "snippet", "window"]
                .iter()
                .map(|m| (m.to_string(), labels.join(format!("{id}.{m}.txt"))))
                .filter(|(_, p)| p.exists())
                .collect();
            plots.push((id, rows));
        }
    } else {
        let gt = args
            .gt
            .clone()
            .ok_or_else(|| Usage("give --labels-dir or --gt".into()))?;
        let mut rows = vec![("gt".to_string(), gt.clone())];
        for pair in &args.pred {
            let (name, file) = pair
                .split_once('=')
                .ok_or_else(|| Usage(format!("--pred expects NAME=FILE, got `{pair}`")))?;
            rows.push((name.to_string(), PathBuf::from(file)));
        }
        let title = args.title.clone().unwrap_or_else(|| {
            let stem = gt.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            stem.trim_end_matches(".gt").to_string()
        });
        plots.push((title, rows));
    }
    let mut rendered = Vec::new();
    for (title, files) in &plots {
        let rows = files
            .iter()
            .map(|(name, path)| Ok((name.clone(), load_label_file(path, &vocab)?)))
            .collect::<Result<Vec<_>>>()?;
        rendered.push((title, ribbons_svg(title, &rows, &vocab)?));
    }
    let mut run = ctx.run("plot")?;
    for (title, svg) in rendered {
        let path = run.path(&format!("{title}.svg"));
        write_atomic(&path, svg)?;
        run.push("plots", json!(path));
    }
    write_atomic(&run.path("legend.svg"), legend_svg(&vocab))?;
    finish(run)
}
