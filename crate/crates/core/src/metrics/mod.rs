//! Frame-wise and segmental evaluation measures, all in percent.

mod frame;
mod report;
mod segmental;
mod segments;

pub use frame::{average_f1, frame_accuracy, per_class_f1};
pub use report::{aggregate_report, evaluate_labels, MeanMetrics, MetricsReport, VideoMetrics};
pub use segmental::{edit_score, levenshtein, segmental_f1, OverlapCriterion, F1_THRESHOLD};
pub use segments::{segments_from_labels, LabelSegment};
