//! Dataset ingestion: vocabularies, transcripts, manifests, frames, folds,
//! snippet extraction, balanced sampling and augmentation.

mod augment;
mod folds;
mod frames;
mod labels;
mod manifest;
mod sampler;
mod snippet;
mod transcript;
mod vocab;

pub use augment::{augment_snippet, AugmentConfig, Corner, CropParams, FrameTransform, SCALE_JITTER};
pub use folds::{build_louo_folds, FoldSpec};
pub use frames::{DirFrameSource, FrameSource, MemoryFrameSource};
pub use labels::{build_label_sequence, LabelSequence};
pub use manifest::{Manifest, VideoRecord};
pub use sampler::{sample_balanced_epoch, Anchor, BalancedEpoch};
pub use snippet::{extract_raw_snippet, extract_snippet, RawSnippet, Snippet, SnippetLayout};
pub use transcript::{parse_transcript, render_transcript, Segment};
pub use vocab::{Gesture, GestureVocabulary};

mod video;
pub use video::{load_videos, VideoData};
