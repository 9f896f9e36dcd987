use super::Segment;
use crate::{Error, Result};

/// Per-frame gesture labels of one video at a working frame rate.
///
/// `None` marks frames not covered by any transcript segment. Such frames
/// never become training anchors and are excluded from evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSequence {
    pub video_id: String,
    pub fps: u32,
    /// Native frames per working frame.
    pub native_stride: usize,
    pub labels: Vec<Option<usize>>,
    pub labeled_start: usize,
    pub labeled_end: usize,
}

impl LabelSequence {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, t: usize) -> Option<usize> {
        self.labels.get(t).copied().flatten()
    }

    /// Native frame index backing working frame `t`.
    pub fn native_frame(&self, t: usize) -> usize {
        t * self.native_stride
    }

    /// Working-rate indices of labeled frames, in order.
    pub fn labeled_frames(&self) -> impl Iterator<Item = usize> + '_ {
        (self.labeled_start..=self.labeled_end).filter(|&t| self.labels[t].is_some())
    }

    /// Labels of the labeled frames, gaps skipped.
    pub fn labeled_values(&self) -> Vec<usize> {
        self.labeled_frames().map(|t| self.labels[t].unwrap()).collect()
    }

    /// Label at `t`, carrying the most recent label forward across gaps
    /// inside the labeled region.
    pub(crate) fn label_or_previous(&self, t: usize) -> usize {
        let t = t.clamp(self.labeled_start, self.labeled_end);
        (self.labeled_start..=t)
            .rev()
            .find_map(|u| self.labels[u])
            .expect("labeled_start is labeled")
    }
}

/// Samples transcript segments at `working_fps`, taking every
/// `native_fps / working_fps`-th native frame starting at native frame 0.
pub fn build_label_sequence(
    video_id: &str,
    segments: &[Segment],
    frame_count_native: usize,
    native_fps: u32,
    working_fps: u32,
) -> Result<LabelSequence> {
    if working_fps == 0 || native_fps == 0 || !native_fps.is_multiple_of(working_fps) {
        return Err(Error::RateMismatch {
            native: native_fps,
            working: working_fps,
        });
    }
    let stride = (native_fps / working_fps) as usize;
    let len = frame_count_native.div_ceil(stride);
    let mut labels = vec![None; len];
    let mut seg_iter = segments.iter().peekable();
    for (t, slot) in labels.iter_mut().enumerate() {
        let native = t * stride;
        while seg_iter.peek().is_some_and(|s| s.end < native) {
            seg_iter.next();
        }
        if let Some(s) = seg_iter.peek() {
            if s.start <= native {
                *slot = Some(s.class);
            }
        }
    }
    let first = labels.iter().position(Option::is_some);
    let last = labels.iter().rposition(Option::is_some);
    match (first, last) {
        (Some(labeled_start), Some(labeled_end)) => Ok(LabelSequence {
            video_id: video_id.to_string(),
            fps: working_fps,
            native_stride: stride,
            labels,
            labeled_start,
            labeled_end,
        }),
        _ => Err(Error::EmptyTranscript(video_id.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(start: usize, end: usize, class: usize) -> Segment {
        Segment { start, end, class }
    }

    #[test]
    fn stride_six_mapping() {
        let seq = build_label_sequence("v", &[seg(0, 59, 3)], 120, 30, 5).unwrap();
        assert_eq!(seq.len(), 20);
        assert!(seq.labels[..10].iter().all(|&l| l == Some(3)));
        assert!(seq.labels[10..].iter().all(Option::is_none));
        assert_eq!((seq.labeled_start, seq.labeled_end), (0, 9));
    }

    #[test]
    fn full_coverage() {
        let seq = build_label_sequence("v", &[seg(0, 119, 1)], 120, 30, 5).unwrap();
        assert_eq!(seq.labeled_start, 0);
        assert_eq!(seq.labeled_end, 19);
        assert!(seq.labels.iter().all(|&l| l == Some(1)));
    }

    #[test]
    fn rate_mismatch() {
        let err = build_label_sequence("v", &[seg(0, 119, 1)], 120, 30, 7).unwrap_err();
        assert!(matches!(err, Error::RateMismatch { native: 30, working: 7 }));
    }

    #[test]
    fn empty_transcript() {
        let err = build_label_sequence("v", &[], 120, 30, 5).unwrap_err();
        assert!(matches!(err, Error::EmptyTranscript(_)));
        // segment entirely between sampled frames
        let err = build_label_sequence("v", &[seg(1, 4, 0)], 120, 30, 5).unwrap_err();
        assert!(matches!(err, Error::EmptyTranscript(_)));
    }

    #[test]
    fn ten_hz_uses_stride_three() {
        let seq = build_label_sequence("v", &[seg(80, 300, 0), seg(301, 470, 4)], 600, 30, 10).unwrap();
        assert_eq!(seq.native_stride, 3);
        assert_eq!(seq.len(), 200);
        // 81 is the first multiple of 3 >= 80
        assert_eq!(seq.labeled_start, 27);
        assert_eq!(seq.get(100), Some(0));
        assert_eq!(seq.get(101), Some(4));
        assert_eq!(seq.labeled_end, 156);
    }

    #[test]
    fn gaps_carry_previous_label() {
        let seq = build_label_sequence("v", &[seg(0, 11, 2), seg(24, 35, 5)], 36, 30, 5).unwrap();
        assert_eq!(seq.labels, vec![Some(2), Some(2), None, None, Some(5), Some(5)]);
        assert_eq!(seq.label_or_previous(3), 2);
        assert_eq!(seq.labeled_values(), vec![2, 2, 5, 5]);
    }
}
