use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    average_f1, edit_score, frame_accuracy, per_class_f1, segmental_f1, segments_from_labels, OverlapCriterion,
    F1_THRESHOLD,
};
use crate::{Error, Result};

/// Measures of one video, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMetrics {
    pub fold: String,
    pub video_id: String,
    pub accuracy: f64,
    pub average_f1: f64,
    pub edit: f64,
    pub f1_at_10: f64,
    pub per_class_f1: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub average_f1: f64,
    pub edit: f64,
    pub f1_at_10: f64,
    /// Per class, mean over the videos in which the class occurs.
    pub per_class_f1: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub videos: Vec<VideoMetrics>,
    pub mean: MeanMetrics,
}

/// All measures for one predicted label sequence.
pub fn evaluate_labels(
    fold: &str,
    video_id: &str,
    pred: &[usize],
    gt: &[usize],
    num_classes: usize,
    criterion: OverlapCriterion,
) -> Result<VideoMetrics> {
    let ps = segments_from_labels(pred)?;
    let gs = segments_from_labels(gt)?;
    Ok(VideoMetrics {
        fold: fold.to_string(),
        video_id: video_id.to_string(),
        accuracy: frame_accuracy(pred, gt)?,
        average_f1: average_f1(pred, gt, num_classes)?,
        edit: edit_score(&ps, &gs)?,
        f1_at_10: segmental_f1(&ps, &gs, F1_THRESHOLD, criterion)?,
        per_class_f1: per_class_f1(pred, gt, num_classes)?,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn mean_of(videos: &[VideoMetrics]) -> MeanMetrics {
    let classes = videos.iter().map(|v| v.per_class_f1.len()).max().unwrap_or(0);
    MeanMetrics {
        accuracy: mean(videos.iter().map(|v| v.accuracy)),
        average_f1: mean(videos.iter().map(|v| v.average_f1)),
        edit: mean(videos.iter().map(|v| v.edit)),
        f1_at_10: mean(videos.iter().map(|v| v.f1_at_10)),
        per_class_f1: (0..classes)
            .map(|c| {
                let vals: Vec<f64> = videos
                    .iter()
                    .filter_map(|v| v.per_class_f1.get(c).copied().flatten())
                    .collect();
                (!vals.is_empty()).then(|| mean(vals.into_iter()))
            })
            .collect(),
    }
}

/// Unweighted mean over videos.
pub fn aggregate_report(videos: Vec<VideoMetrics>) -> Result<MetricsReport> {
    if videos.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mean = mean_of(&videos);
    Ok(MetricsReport { videos, mean })
}

impl MetricsReport {
    /// Fold names in first-appearance order.
    fn folds(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for v in &self.videos {
            if !out.contains(&v.fold.as_str()) {
                out.push(&v.fold);
            }
        }
        out
    }

    /// One row per (fold, video), a mean row per fold and an overall mean row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fold,video,accuracy,average_f1,edit,f1_at_10\n");
        let row = |s: &mut String, fold: &str, video: &str, a: f64, f: f64, e: f64, f10: f64| {
            let _ = writeln!(s, "{fold},{video},{a:.4},{f:.4},{e:.4},{f10:.4}");
        };
        for fold in self.folds() {
            let members: Vec<VideoMetrics> = self.videos.iter().filter(|v| v.fold == fold).cloned().collect();
            for v in &members {
                row(&mut s, fold, &v.video_id, v.accuracy, v.average_f1, v.edit, v.f1_at_10);
            }
            let m = mean_of(&members);
            row(&mut s, fold, "mean", m.accuracy, m.average_f1, m.edit, m.f1_at_10);
        }
        let m = &self.mean;
        row(&mut s, "all", "mean", m.accuracy, m.average_f1, m.edit, m.f1_at_10);
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:<16} {:>8} {:>8} {:>8} {:>8}",
            "fold", "video", "acc", "avgF1", "edit", "F1@10"
        );
        for v in &self.videos {
            let _ = writeln!(
                s,
                "{:<12} {:<16} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
                v.fold, v.video_id, v.accuracy, v.average_f1, v.edit, v.f1_at_10
            );
        }
        let m = &self.mean;
        let _ = writeln!(
            s,
            "{:<12} {:<16} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
            "all", "mean", m.accuracy, m.average_f1, m.edit, m.f1_at_10
        );
        s
    }
}
