use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LabelSequence;
use crate::{Error, Result};

/// A training anchor: video position in the training list and working-rate
/// frame index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Anchor {
    pub video: usize,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalancedEpoch {
    /// Grouped by class in ascending order.
    pub anchors: Vec<Anchor>,
    pub per_class: Vec<usize>,
    /// Vocabulary classes with no anchor in the training videos.
    pub absent: Vec<usize>,
}

/// Draws `n_target` anchors so that every class present in `videos` is the
/// ground-truth label at the anchor equally often (counts differ by at most
/// one, extra anchors going to the lowest class indices). Classes are drawn
/// without replacement when they have enough anchors, with replacement
/// otherwise. Absent classes are reported and their share spread over the
/// present ones.
pub fn sample_balanced_epoch(
    videos: &[&LabelSequence],
    num_classes: usize,
    n_target: usize,
    seed: u64,
) -> Result<BalancedEpoch> {
    let mut candidates: Vec<Vec<Anchor>> = vec![Vec::new(); num_classes];
    for (v, seq) in videos.iter().enumerate() {
        for t in seq.labeled_frames() {
            if let Some(c) = seq.labels[t] {
                if c < num_classes {
                    candidates[c].push(Anchor { video: v, t });
                }
            }
        }
    }
    let present: Vec<usize> = (0..num_classes).filter(|&c| !candidates[c].is_empty()).collect();
    let absent: Vec<usize> = (0..num_classes).filter(|&c| candidates[c].is_empty()).collect();
    if present.is_empty() {
        return Err(Error::NoAnchors);
    }
    if !absent.is_empty() {
        log::warn!("classes {absent:?} have no training anchors; their quota is spread over the rest");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_class = vec![0; num_classes];
    let mut anchors = Vec::with_capacity(n_target);
    let (base, extra) = (n_target / present.len(), n_target % present.len());
    for (rank, &c) in present.iter().enumerate() {
        let quota = base + usize::from(rank < extra);
        let pool = &candidates[c];
        if pool.len() >= quota {
            anchors.extend(index::sample(&mut rng, pool.len(), quota).iter().map(|i| pool[i]));
        } else {
            anchors.extend((0..quota).map(|_| pool[rng.random_range(0..pool.len())]));
        }
        per_class[c] = quota;
    }
    Ok(BalancedEpoch {
        anchors,
        per_class,
        absent,
    })
}
