use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::loss::weighted_ce_with_grad;
use crate::data::{
    augment_snippet, extract_raw_snippet, extract_snippet, sample_balanced_epoch, Anchor, AugmentConfig, FoldSpec,
    FrameTransform, LabelSequence, Snippet, SnippetLayout, VideoData,
};
use crate::model::{save_checkpoint, GestureModel, ModelParameters};
use crate::nn::{Adam, Mode};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
    /// Frame accuracy of the training-mode predictions on this epoch's snippets.
    pub train_accuracy: f64,
    pub anchors_per_class: Vec<usize>,
    pub seconds: f64,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn to_json_lines(&self) -> String {
        self.epochs
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain record") + "\n")
            .collect()
    }
}

/// Snippet spacing in label frames for a working rate (snippet frames are
/// always 0.2 s apart).
fn layout_for(frames: usize, working_fps: u32) -> SnippetLayout {
    SnippetLayout {
        len: frames,
        step: (working_fps as usize / 5).max(1),
    }
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn select_videos<'a>(ids: &[String], videos: &'a [VideoData]) -> Result<Vec<&'a VideoData>> {
    ids.iter()
        .map(|id| {
            videos
                .iter()
                .find(|v| v.id() == id)
                .ok_or_else(|| Error::UnknownVideo(id.clone()))
        })
        .collect()
}

/// Trains `init` on the training videos of `fold`.
///
/// Each epoch draws a class-balanced anchor set, shuffles it, and runs Adam
/// on the temporally weighted loss over mini-batches of augmented snippets.
/// With `out_dir`, the per-epoch log is appended to `train_log.jsonl` and
/// checkpoints are written every `checkpoint_every` epochs and after the
/// last one.
pub fn train(
    config: &TrainConfig,
    fold: &FoldSpec,
    videos: &[VideoData],
    init: ModelParameters,
    out_dir: Option<&Path>,
) -> Result<(ModelParameters, TrainLog)> {
    config.validate()?;
    let mut log = TrainLog::default();
    if config.epochs == 0 {
        return Ok((init, log));
    }
    let train_videos = select_videos(&fold.train_videos, videos)?;
    if train_videos.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let mut model = GestureModel::from_parameters(init)?;
    let arch = model.arch().clone();
    let labels: Vec<LabelSequence> = train_videos
        .iter()
        .map(|v| v.labels_at(config.working_fps))
        .collect::<Result<_>>()?;
    let label_refs: Vec<&LabelSequence> = labels.iter().collect();
    let layout = layout_for(arch.input_frames(), config.working_fps);
    let transform = FrameTransform::with_size(arch.input_size as u32);
    let augment = if config.augment {
        AugmentConfig {
            flip: config.flip,
            ..AugmentConfig::default()
        }
    } else {
        AugmentConfig::disabled()
    };
    let mut adam = Adam::new(config.initial_lr);
    let mut log_file = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join("train_log.jsonl");
            Some((std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?, path))
        }
        None => None,
    };

    let first_epoch = model.params.meta.epoch;
    for e in 0..config.epochs {
        let start = Instant::now();
        let seed = epoch_seed(config.seed, e);
        let epoch = sample_balanced_epoch(&label_refs, arch.num_classes, config.snippets_per_epoch, seed)?;
        let mut anchors = epoch.anchors;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        anchors.shuffle(&mut rng);
        adam.lr = config.lr_at(e);

        let (mut loss_sum, mut correct, mut frames) = (0.0, 0usize, 0usize);
        for (b, batch) in anchors.chunks(config.batch_size).enumerate() {
            let snippets: Vec<Snippet> = batch
                .par_iter()
                .enumerate()
                .map(|(i, a)| {
                    let video = train_videos[a.video];
                    let raw = extract_raw_snippet(video.frames.as_ref(), &labels[a.video], a.t, layout)?;
                    let mut crop_rng = ChaCha8Rng::seed_from_u64(seed ^ ((b * config.batch_size + i) as u64) << 20);
                    Ok(augment_snippet(&raw, &mut crop_rng, &augment, &transform))
                })
                .collect::<Result<_>>()?;
            let refs: Vec<_> = snippets.iter().map(|s| &s.frames).collect();
            let targets: Vec<Vec<usize>> = snippets
                .iter()
                .map(|s| s.labels[s.labels.len() - arch.output_len()..].to_vec())
                .collect();
            let x = model.batch_input(&refs)?;
            let (y, tape) = model.network.forward(&model.params.store, x.into_dyn(), Mode::Train)?;
            let logits = y
                .into_dimensionality::<ndarray::Ix3>()
                .map_err(|_| Error::InvalidConfig("network output is not N × G × L".into()))?;
            let (loss, grad) = weighted_ce_with_grad(&logits, &targets)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch: e + 1, batch: b });
            }
            for (n, t) in targets.iter().enumerate() {
                for (c, &l) in t.iter().enumerate() {
                    let col = logits.slice(ndarray::s![n, .., c]);
                    correct += usize::from(crate::util::argmax(col.iter().map(|&v| v as f64)) == l);
                    frames += 1;
                }
            }
            loss_sum += loss * batch.len() as f64;
            let grads = model.network.param_grads(&model.params.store, &tape, grad.into_dyn())?;
            adam.step(&mut model.params.store, &grads);
            model.network.update_running_stats(&mut model.params.store, &tape);
        }
        if !model.params.store.all_finite() {
            return Err(Error::NonFiniteLoss {
                epoch: e + 1,
                batch: usize::MAX,
            });
        }
        model.params.meta.epoch = first_epoch + e + 1;

        let done = e + 1;
        let checkpoint = match out_dir {
            Some(dir) if done % config.checkpoint_every == 0 || done == config.epochs => {
                let path = dir.join(format!("checkpoint_{:04}.ckpt", model.params.meta.epoch));
                save_checkpoint(&path, &model.params)?;
                Some(path)
            }
            _ => None,
        };
        let record = EpochRecord {
            epoch: done,
            loss: loss_sum / anchors.len() as f64,
            lr: adam.lr,
            train_accuracy: correct as f64 / frames.max(1) as f64,
            anchors_per_class: epoch.per_class,
            seconds: start.elapsed().as_secs_f64(),
            checkpoint,
        };
        log::info!(
            "epoch {done}/{}: loss {:.4} acc {:.3} lr {:.2e} ({:.1}s)",
            config.epochs,
            record.loss,
            record.train_accuracy,
            record.lr,
            record.seconds
        );
        if let Some((file, path)) = log_file.as_mut() {
            let line = serde_json::to_string(&record)? + "\n";
            file.write_all(line.as_bytes())
                .map_err(|e| Error::io(path.as_path(), e))?;
        }
        log.epochs.push(record);
    }
    if let Some(dir) = out_dir {
        save_checkpoint(&dir.join("model.ckpt"), &model.params)?;
    }
    Ok((model.params, log))
}

/// Evaluation-mode frame accuracy over every column of the snippets ending
/// at `anchors` (`Anchor::video` indexes `videos`).
pub fn snippet_frame_accuracy(
    model: &GestureModel,
    videos: &[&VideoData],
    working_fps: u32,
    anchors: &[Anchor],
) -> Result<f64> {
    if anchors.is_empty() {
        return Err(Error::EmptyInput);
    }
    let arch = model.arch();
    let labels: Vec<LabelSequence> = videos.iter().map(|v| v.labels_at(working_fps)).collect::<Result<_>>()?;
    let layout = layout_for(arch.input_frames(), working_fps);
    let transform = FrameTransform::with_size(arch.input_size as u32);
    let (mut correct, mut total) = (0, 0);
    for chunk in anchors.chunks(16) {
        let snippets: Vec<Snippet> = chunk
            .iter()
            .map(|a| {
                extract_snippet(
                    videos[a.video].frames.as_ref(),
                    &labels[a.video],
                    a.t,
                    layout,
                    &transform,
                )
            })
            .collect::<Result<_>>()?;
        let refs: Vec<_> = snippets.iter().map(|s| &s.frames).collect();
        for (probs, s) in model.predict(&refs)?.iter().zip(&snippets) {
            let targets = &s.labels[s.labels.len() - probs.ncols()..];
            for (c, &l) in targets.iter().enumerate() {
                correct += usize::from(crate::util::argmax(probs.column(c).iter().copied()) == l);
                total += 1;
            }
        }
    }
    Ok(correct as f64 / total as f64)
}
