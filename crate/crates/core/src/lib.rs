//! Dense-prediction 3D convolutional networks for video-based surgical
//! gesture recognition.
//!
//! The crate is split along the pipeline:
//!
//! * [`data`] ingests transcripts, manifests and decoded frames, builds
//!   leave-one-user-out folds, samples class-balanced training snippets and
//!   applies snippet-consistent augmentation.
//! * [`nn`] is a small CPU tensor engine (3D convolution, batch norm,
//!   pooling, transposed 1D convolution, Adam) with hand-written backward
//!   passes.
//! * [`model`] assembles the 3D ResNet-18 dense predictor and the 2D
//!   frame-wise baseline, inflates 2D weights into 3D kernels and reads and
//!   writes checkpoints.
//! * [`training`] holds the temporally weighted loss and the optimisation loop.
//! * [`inference`] turns a trained model into per-frame labels, snippet-wise
//!   or by sliding-window accumulation, at 5 Hz or 10 Hz.
//! * [`metrics`] implements accuracy, average F1, edit score and segmental F1.
//! * [`synth`] renders a small synthetic gesture dataset in the same on-disk
//!   layout as the real one.

pub mod data;
pub mod error;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod synth;
pub mod training;
mod util;

pub use error::{Error, Result};

/// Number of frames in one snippet.
pub const CLIP_LEN: usize = 16;
