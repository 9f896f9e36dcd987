use std::sync::Arc;

use super::{
    build_label_sequence, parse_transcript, DirFrameSource, FrameSource, GestureVocabulary, LabelSequence, Manifest,
    Segment, VideoRecord,
};
use crate::util::read_to_string;
use crate::Result;

/// A video with its parsed transcript, 5 Hz labels and frame access.
#[derive(Clone)]
pub struct VideoData {
    pub record: VideoRecord,
    pub segments: Vec<Segment>,
    pub labels: LabelSequence,
    pub frames: Arc<dyn FrameSource>,
}

impl std::fmt::Debug for VideoData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VideoData")
            .field("record", &self.record)
            .field("segments", &self.segments.len())
            .field("labels", &self.labels.len())
            .finish()
    }
}

impl VideoData {
    pub fn id(&self) -> &str {
        &self.record.video_id
    }

    /// Labels resampled at another rate from the same transcript.
    pub fn labels_at(&self, fps: u32) -> Result<LabelSequence> {
        if fps == self.labels.fps {
            return Ok(self.labels.clone());
        }
        build_label_sequence(
            &self.record.video_id,
            &self.segments,
            self.record.frame_count_native,
            self.record.native_fps,
            fps,
        )
    }
}

/// Loads transcripts for every manifest record and attaches a frame cache
/// that downsizes frames to `short_side`.
pub fn load_videos(
    manifest: &Manifest,
    vocab: &GestureVocabulary,
    working_fps: u32,
    short_side: Option<u32>,
) -> Result<Vec<VideoData>> {
    manifest
        .records
        .iter()
        .map(|record| {
            let text = read_to_string(&record.transcript)?;
            let segments = parse_transcript(&text, vocab)?;
            let labels = build_label_sequence(
                &record.video_id,
                &segments,
                record.frame_count_native,
                record.native_fps,
                working_fps,
            )?;
            Ok(VideoData {
                record: record.clone(),
                segments,
                labels,
                frames: Arc::new(DirFrameSource::new(&record.frame_dir, short_side)),
            })
        })
        .collect()
}
