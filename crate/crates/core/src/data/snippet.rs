use std::sync::Arc;

use image::RgbImage;
use ndarray::Array4;

use super::{CropParams, FrameSource, FrameTransform, LabelSequence};
use crate::{Error, Result, CLIP_LEN};

/// Temporal layout of a snippet relative to a label sequence.
///
/// `step` is the spacing between snippet frames in label-sequence frames: 1
/// when labels are sampled at 5 Hz, 2 when they are sampled at 10 Hz (the
/// snippet itself always spans frames 0.2 s apart).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnippetLayout {
    pub len: usize,
    pub step: usize,
}

impl Default for SnippetLayout {
    fn default() -> Self {
        Self { len: CLIP_LEN, step: 1 }
    }
}

impl SnippetLayout {
    /// Label-sequence positions of the snippet frames, oldest first.
    /// Positions before `labeled_start` replicate `labeled_start`.
    pub fn positions(&self, anchor_t: usize, labeled_start: usize) -> Vec<usize> {
        (0..self.len)
            .map(|i| {
                let back = (self.len - 1 - i) * self.step;
                anchor_t
                    .checked_sub(back)
                    .map_or(labeled_start, |p| p.max(labeled_start))
            })
            .collect()
    }
}

/// Snippet frames at source resolution, before cropping and normalisation.
#[derive(Debug, Clone)]
pub struct RawSnippet {
    pub frames: Vec<Arc<RgbImage>>,
    pub labels: Vec<usize>,
    pub anchor_t: usize,
}

/// Network-ready snippet: frames as `3 × L × S × S`, oldest first.
#[derive(Debug, Clone)]
pub struct Snippet {
    pub frames: Array4<f32>,
    pub labels: Vec<usize>,
    pub anchor_t: usize,
}

pub fn extract_raw_snippet(
    frames: &dyn FrameSource,
    labels: &LabelSequence,
    anchor_t: usize,
    layout: SnippetLayout,
) -> Result<RawSnippet> {
    if anchor_t < labels.labeled_start || anchor_t > labels.labeled_end {
        return Err(Error::AnchorOutOfRange {
            anchor: anchor_t,
            start: labels.labeled_start,
            end: labels.labeled_end,
        });
    }
    let positions = layout.positions(anchor_t, labels.labeled_start);
    let images = positions
        .iter()
        .map(|&p| frames.frame(labels.native_frame(p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RawSnippet {
        frames: images,
        labels: positions.iter().map(|&p| labels.label_or_previous(p)).collect(),
        anchor_t,
    })
}

/// Extracts the snippet ending at `anchor_t` with the evaluation transform
/// (full-frame center crop, resized to the network input size).
pub fn extract_snippet(
    frames: &dyn FrameSource,
    labels: &LabelSequence,
    anchor_t: usize,
    layout: SnippetLayout,
    transform: &FrameTransform,
) -> Result<Snippet> {
    let raw = extract_raw_snippet(frames, labels, anchor_t, layout)?;
    Ok(transform.apply(&raw, CropParams::center()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_label_sequence, MemoryFrameSource, Segment};

    /// Native frame `i` is a flat image with red channel `i % 256`.
    fn source(n: usize) -> MemoryFrameSource {
        MemoryFrameSource::new(
            (0..n)
                .map(|i| RgbImage::from_pixel(8, 8, image::Rgb([(i % 256) as u8, 0, 0])))
                .collect(),
        )
    }

    fn labels() -> LabelSequence {
        // native 60..=599 labeled -> working 10..=99
        let segs = [
            Segment {
                start: 60,
                end: 299,
                class: 1,
            },
            Segment {
                start: 300,
                end: 599,
                class: 2,
            },
        ];
        build_label_sequence("v", &segs, 600, 30, 5).unwrap()
    }

    fn red(s: &RawSnippet) -> Vec<u8> {
        s.frames.iter().map(|f| f.get_pixel(0, 0).0[0]).collect()
    }

    #[test]
    fn interior_anchor_has_no_padding() {
        let l = labels();
        let s = extract_raw_snippet(&source(600), &l, l.labeled_start + 20, SnippetLayout::default()).unwrap();
        let expect: Vec<u8> = (15..=30).map(|t: usize| ((t * 6) % 256) as u8).collect();
        assert_eq!(red(&s), expect);
        assert!(s.labels.iter().all(|&c| c == 1));
    }

    #[test]
    fn first_labeled_anchor_replicates() {
        let l = labels();
        let s = extract_raw_snippet(&source(600), &l, l.labeled_start, SnippetLayout::default()).unwrap();
        assert!(red(&s).iter().all(|&r| r == 60));
        assert_eq!(s.labels, vec![1; 16]);
    }

    #[test]
    fn anchor_past_region_rejected() {
        let l = labels();
        let err = extract_raw_snippet(&source(600), &l, l.labeled_end + 1, SnippetLayout::default()).unwrap_err();
        assert!(matches!(err, Error::AnchorOutOfRange { .. }));
        assert!(extract_raw_snippet(&source(600), &l, l.labeled_start - 1, SnippetLayout::default()).is_err());
    }

    #[test]
    fn consecutive_anchors_share_fifteen_frames() {
        let l = labels();
        let src = source(600);
        for t in [l.labeled_start + 3, 40, 98] {
            let a = extract_raw_snippet(&src, &l, t, SnippetLayout::default()).unwrap();
            let b = extract_raw_snippet(&src, &l, t + 1, SnippetLayout::default()).unwrap();
            if t >= l.labeled_start + 15 {
                assert_eq!(red(&a)[1..], red(&b)[..15]);
            }
            assert_eq!(a.labels[1..], b.labels[..15]);
        }
    }

    #[test]
    fn ten_hz_layout_keeps_five_hz_spacing() {
        let segs = [Segment {
            start: 0,
            end: 599,
            class: 0,
        }];
        let l10 = build_label_sequence("v", &segs, 600, 30, 10).unwrap();
        let s = extract_raw_snippet(&source(600), &l10, 101, SnippetLayout { len: 16, step: 2 }).unwrap();
        let natives: Vec<u8> = (0..16).map(|i| (((101 - (15 - i) * 2) * 3) % 256) as u8).collect();
        assert_eq!(red(&s), natives);
        // neighbouring frames are 6 native frames (0.2 s) apart
        assert_eq!(natives[15].wrapping_sub(natives[14]), 6);
    }
}
