//! Per-frame gesture estimates from dense snippet predictions.
//!
//! A [`PredictionStream`] holds one `G × C` score matrix per anchor of the
//! labeled region. Column `C - 1` estimates the anchor itself and column
//! `C - 1 - d` the frame `d` steps earlier on the evaluation grid. At 10 Hz
//! the 16 snippet columns are upsampled to 32 so that columns line up with
//! the 10 Hz grid.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::data::{extract_snippet, FrameTransform, GestureVocabulary, Snippet, SnippetLayout, VideoData};
use crate::model::GestureModel;
use crate::util::{argmax, read_to_string, write_atomic};
use crate::{Error, Result};

const DUMP_MAGIC: &[u8; 8] = b"GSTSCORE";
const DUMP_VERSION: u32 = 1;
const BATCH: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionStream {
    pub video_id: String,
    pub eval_fps: u32,
    /// Evaluation-grid index of the first anchor.
    pub labeled_start: usize,
    /// One `G × C` matrix per consecutive anchor.
    pub scores: Vec<Array2<f64>>,
    /// Ground truth at each anchor, `None` inside transcript gaps.
    pub gt: Vec<Option<usize>>,
}

impl PredictionStream {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.scores.first().map_or(0, |s| s.nrows())
    }

    pub fn columns(&self) -> usize {
        self.scores.first().map_or(0, |s| s.ncols())
    }

    /// Largest usable look-ahead.
    pub fn max_lookahead(&self) -> usize {
        self.columns().saturating_sub(1)
    }
}

/// `G × L` to `G × 2L`: `γ̃[0] = γ̂[0]` and
/// `γ̃[j] = (γ̂[⌊(j-1)/2⌋] + γ̂[⌈(j-1)/2⌉]) / 2` for `j ≥ 1`.
pub fn upsample_prediction(scores: &Array2<f64>) -> Array2<f64> {
    let (g, l) = scores.dim();
    Array2::from_shape_fn((g, 2 * l), |(c, j)| {
        if j == 0 {
            scores[[c, 0]]
        } else {
            let (lo, hi) = ((j - 1) / 2, j / 2);
            0.5 * scores[[c, lo]] + 0.5 * scores[[c, hi]]
        }
    })
}

/// Runs the model on every anchor of the labeled region at `eval_fps`
/// (5 or 10). Snippet frames stay 0.2 s apart at either rate.
pub fn predict_video(model: &GestureModel, video: &VideoData, eval_fps: u32) -> Result<PredictionStream> {
    if eval_fps != 5 && eval_fps != 10 {
        return Err(Error::InvalidConfig(format!(
            "evaluation rate must be 5 or 10 fps, got {eval_fps}"
        )));
    }
    let labels = video.labels_at(eval_fps)?;
    let arch = model.arch();
    let layout = SnippetLayout {
        len: arch.input_frames(),
        step: (eval_fps / 5) as usize,
    };
    let transform = FrameTransform::with_size(arch.input_size as u32);
    let anchors: Vec<usize> = (labels.labeled_start..=labels.labeled_end).collect();
    let mut scores = Vec::with_capacity(anchors.len());
    for chunk in anchors.chunks(BATCH) {
        let snippets: Vec<Snippet> = chunk
            .iter()
            .map(|&t| extract_snippet(video.frames.as_ref(), &labels, t, layout, &transform))
            .collect::<Result<_>>()?;
        let refs: Vec<_> = snippets.iter().map(|s| &s.frames).collect();
        for p in model.predict(&refs)? {
            scores.push(if eval_fps == 10 && p.ncols() > 1 {
                upsample_prediction(&p)
            } else {
                p
            });
        }
    }
    Ok(PredictionStream {
        video_id: video.id().to_string(),
        eval_fps,
        labeled_start: labels.labeled_start,
        gt: anchors.iter().map(|&t| labels.labels[t]).collect(),
        scores,
    })
}

/// Argmax of the newest column at every anchor.
pub fn snippetwise_labels(stream: &PredictionStream) -> Vec<usize> {
    stream
        .scores
        .iter()
        .map(|s| argmax(s.column(s.ncols() - 1).iter().copied()))
        .collect()
}

/// Summed scores for every anchor time: the column estimating `t` from each
/// anchor `t + d`, `d = 0..=k`, over the anchors that exist.
pub fn accumulate_scores(stream: &PredictionStream, k: usize) -> Result<Vec<Vec<f64>>> {
    if k > stream.max_lookahead() {
        return Err(Error::InvalidConfig(format!(
            "look-ahead {k} exceeds {} for {}-column predictions",
            stream.max_lookahead(),
            stream.columns()
        )));
    }
    let (n, c) = (stream.len(), stream.columns());
    Ok((0..n)
        .map(|t| {
            let mut acc = vec![0.0; stream.num_classes()];
            for d in 0..=k.min(n - 1 - t) {
                let col = stream.scores[t + d].column(c - 1 - d);
                acc.iter_mut().zip(col).for_each(|(a, v)| *a += v);
            }
            acc
        })
        .collect())
}

/// Sliding-window labels with look-ahead `k`; ties go to the lowest class.
pub fn accumulate_sliding_window(stream: &PredictionStream, k: usize) -> Result<Vec<usize>> {
    Ok(accumulate_scores(stream, k)?.into_iter().map(argmax).collect())
}

/// Predicted and ground-truth labels at the anchors that have ground truth.
pub fn scored_pairs(stream: &PredictionStream, predicted: &[usize]) -> (Vec<usize>, Vec<usize>) {
    stream
        .gt
        .iter()
        .zip(predicted)
        .filter_map(|(g, &p)| g.map(|g| (p, g)))
        .unzip()
}

pub fn write_score_dump<W: Write>(mut w: W, stream: &PredictionStream) -> std::io::Result<()> {
    let header = [
        DUMP_VERSION,
        stream.num_classes() as u32,
        stream.columns() as u32,
        stream.eval_fps,
        stream.labeled_start as u32,
        stream.len() as u32,
        stream.video_id.len() as u32,
    ];
    w.write_all(DUMP_MAGIC)?;
    for v in header {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(stream.video_id.as_bytes())?;
    let mut buf = Vec::new();
    for (s, g) in stream.scores.iter().zip(&stream.gt) {
        buf.extend_from_slice(&g.map_or(-1, |g| g as i32).to_le_bytes());
        for col in s.columns() {
            for v in col {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    w.write_all(&buf)?;
    w.flush()
}

pub fn read_score_dump<R: Read>(mut r: R) -> std::result::Result<PredictionStream, String> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| e.to_string())?;
    let mut pos = 0;
    let mut take = |n: usize| -> std::result::Result<&[u8], String> {
        let s = bytes.get(pos..pos + n).ok_or("truncated score dump")?;
        pos += n;
        Ok(s)
    };
    if take(8)? != DUMP_MAGIC {
        return Err("not a score dump".into());
    }
    let mut header = [0u32; 7];
    for h in header.iter_mut() {
        *h = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
    }
    let [version, g, c, fps, start, n, id_len] = header.map(|v| v as usize);
    if version != DUMP_VERSION as usize {
        return Err(format!("unsupported score dump version {version}"));
    }
    let video_id = String::from_utf8(take(id_len)?.to_vec()).map_err(|_| "non-UTF-8 video id")?;
    let mut scores = Vec::with_capacity(n);
    let mut gt = Vec::with_capacity(n);
    for _ in 0..n {
        let label = i32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
        gt.push(usize::try_from(label).ok());
        let raw = take(g * c * 8)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        // stored column by column
        scores.push(
            Array2::from_shape_vec((c, g), values)
                .map_err(|e| e.to_string())?
                .reversed_axes()
                .to_owned(),
        );
    }
    if take(1).is_ok() {
        return Err("trailing bytes after score dump".into());
    }
    Ok(PredictionStream {
        video_id,
        eval_fps: fps as u32,
        labeled_start: start,
        scores,
        gt,
    })
}

pub fn save_score_dump(path: &Path, stream: &PredictionStream) -> Result<()> {
    let mut buf = Vec::new();
    write_score_dump(&mut buf, stream).map_err(|e| Error::io(path, e))?;
    write_atomic(path, &buf)
}

pub fn load_score_dump(path: &Path) -> Result<PredictionStream> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_score_dump(std::io::BufReader::new(file)).map_err(|msg| Error::format(path.display().to_string(), msg))
}

/// One gesture id per line.
pub fn render_label_file(labels: &[usize], vocab: &GestureVocabulary) -> String {
    labels
        .iter()
        .map(|&l| vocab.get(l).map_or("?", |g| g.id.as_str()).to_string() + "\n")
        .collect()
}

pub fn parse_label_file(text: &str, vocab: &GestureVocabulary) -> Result<Vec<usize>> {
    let labels = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            vocab.index_of(l.trim()).ok_or_else(|| Error::UnknownGesture {
                line: n + 1,
                id: l.trim().to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if labels.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(labels)
}

pub fn load_label_file(path: &Path, vocab: &GestureVocabulary) -> Result<Vec<usize>> {
    parse_label_file(&read_to_string(path)?, vocab).map_err(|e| match e {
        Error::EmptySequence => Error::format(path.display().to_string(), "empty label file"),
        other => other,
    })
}
