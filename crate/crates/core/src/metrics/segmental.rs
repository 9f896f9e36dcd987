use super::segments::LabelSegment;
use crate::{Error, Result};

/// Overlap threshold of the segmental F1 score.
pub const F1_THRESHOLD: f64 = 0.10;

/// How a predicted segment's overlap with a ground-truth segment is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapCriterion {
    /// Intersection over union.
    #[default]
    Iou,
    /// Intersection over the ground-truth segment length.
    OverGroundTruth,
}

impl std::str::FromStr for OverlapCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iou" => Ok(Self::Iou),
            "gt" | "over-gt" => Ok(Self::OverGroundTruth),
            _ => Err(Error::InvalidConfig(format!("unknown overlap criterion '{s}'"))),
        }
    }
}

impl OverlapCriterion {
    pub fn overlap(&self, pred: &LabelSegment, gt: &LabelSegment) -> f64 {
        let lo = pred.start.max(gt.start);
        let hi = pred.end.min(gt.end);
        if hi < lo {
            return 0.0;
        }
        let inter = (hi + 1 - lo) as f64;
        match self {
            Self::Iou => inter / (pred.end.max(gt.end) + 1 - pred.start.min(gt.start)) as f64,
            Self::OverGroundTruth => inter / gt.len() as f64,
        }
    }
}

/// Edit distance between two label strings.
pub fn levenshtein(a: &[usize], b: &[usize]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut row = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            row[j + 1] = sub.min(prev[j + 1] + 1).min(row[j] + 1);
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[b.len()]
}

/// `100 · (1 - D / max(|p|, |g|))` over segment label strings, at least 0.
pub fn edit_score(pred: &[LabelSegment], gt: &[LabelSegment]) -> Result<f64> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::EmptySequence);
    }
    let p: Vec<usize> = pred.iter().map(|s| s.class).collect();
    let g: Vec<usize> = gt.iter().map(|s| s.class).collect();
    let d = levenshtein(&p, &g) as f64;
    Ok((100.0 * (1.0 - d / p.len().max(g.len()) as f64)).max(0.0))
}

fn covered(segments: &[LabelSegment]) -> usize {
    segments.last().map_or(0, |s| s.end + 1)
}

/// Segmental F1 in percent. Predicted segments are visited in temporal order;
/// each is a true positive when a same-class ground-truth segment not yet
/// matched overlaps it by more than `tau` (the earliest such segment is
/// taken), otherwise a false positive. Unmatched ground truth counts as
/// false negatives.
pub fn segmental_f1(pred: &[LabelSegment], gt: &[LabelSegment], tau: f64, criterion: OverlapCriterion) -> Result<f64> {
    if covered(pred) != covered(gt) {
        return Err(Error::LengthMismatch {
            left: covered(pred),
            right: covered(gt),
        });
    }
    let mut used = vec![false; gt.len()];
    let mut tp = 0;
    for p in pred {
        let hit = gt
            .iter()
            .enumerate()
            .find(|(i, g)| !used[*i] && g.class == p.class && criterion.overlap(p, g) > tau);
        if let Some((i, _)) = hit {
            used[i] = true;
            tp += 1;
        }
    }
    let fp = pred.len() - tp;
    let fneg = gt.len() - tp;
    let denom = 2 * tp + fp + fneg;
    Ok(if denom == 0 {
        0.0
    } else {
        100.0 * 2.0 * tp as f64 / denom as f64
    })
}
