use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: unknown gesture id `{id}`")]
    UnknownGesture { line: usize, id: String },
    #[error("line {line}: malformed transcript line `{content}`")]
    MalformedLine { line: usize, content: String },
    #[error("overlapping segments: [{prev_start}, {prev_end}] and [{start}, {end}]")]
    OverlappingSegments {
        prev_start: usize,
        prev_end: usize,
        start: usize,
        end: usize,
    },
    #[error("transcript for `{0}` contains no labeled frames")]
    EmptyTranscript(String),
    #[error("working rate {working} fps does not evenly divide native rate {native} fps")]
    RateMismatch { native: u32, working: u32 },
    #[error("leave-one-user-out needs at least two subjects, found {0}")]
    SingleSubject(usize),
    #[error("anchor {anchor} outside labeled region [{start}, {end}]")]
    AnchorOutOfRange { anchor: usize, start: usize, end: usize },
    #[error("no gesture class has any anchor in the training set")]
    NoAnchors,
    #[error("shape mismatch for {what}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        what: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("missing parameter `{0}`")]
    MissingKey(String),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("empty label sequence")]
    EmptySequence,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("nothing to aggregate")]
    EmptyInput,
    #[error("unknown video `{0}`")]
    UnknownVideo(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn shape(what: impl Into<String>, expected: &[usize], found: &[usize]) -> Self {
        Error::ShapeMismatch {
            what: what.into(),
            expected: expected.to_vec(),
            found: found.to_vec(),
        }
    }
}
