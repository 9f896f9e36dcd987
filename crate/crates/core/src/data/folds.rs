use std::collections::BTreeSet;

use super::VideoRecord;
use crate::{Error, Result};

/// One leave-one-user-out split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSpec {
    pub held_out_subject: String,
    pub train_videos: Vec<String>,
    pub test_videos: Vec<String>,
}

/// One fold per subject, ordered by subject id. Video order within a fold
/// follows the input order.
pub fn build_louo_folds(records: &[VideoRecord]) -> Result<Vec<FoldSpec>> {
    let subjects: BTreeSet<&str> = records.iter().map(|r| r.subject_id.as_str()).collect();
    if subjects.len() < 2 {
        return Err(Error::SingleSubject(subjects.len()));
    }
    Ok(subjects
        .into_iter()
        .map(|subject| {
            let (test, train): (Vec<&VideoRecord>, Vec<&VideoRecord>) =
                records.iter().partition(|r| r.subject_id == subject);
            FoldSpec {
                held_out_subject: subject.to_string(),
                train_videos: train.iter().map(|r| r.video_id.clone()).collect(),
                test_videos: test.iter().map(|r| r.video_id.clone()).collect(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use std::path::PathBuf;

    use super::*;

    fn record(video: &str, subject: &str) -> VideoRecord {
        VideoRecord {
            video_id: video.into(),
            subject_id: subject.into(),
            frame_count_native: 100,
            native_fps: 30,
            transcript: PathBuf::new(),
            frame_dir: PathBuf::new(),
        }
    }

    #[test]
    fn jigsaws_sized_split() {
        // 8 subjects, 39 videos: one subject has four trials
        let subjects = ["B", "C", "D", "E", "F", "G", "H", "I"];
        let mut records = Vec::new();
        for (i, s) in subjects.iter().enumerate() {
            let trials = if i == 7 { 4 } else { 5 };
            for k in 0..trials {
                records.push(record(&format!("Suturing_{s}{:03}", k + 1), s));
            }
        }
        assert_eq!(records.len(), 39);
        let folds = build_louo_folds(&records).unwrap();
        assert_eq!(folds.len(), 8);
        for f in &folds {
            assert_eq!(f.train_videos.len() + f.test_videos.len(), 39);
        }
    }

    #[test]
    fn minimal_two_subjects() {
        let folds = build_louo_folds(&[record("a", "X"), record("b", "Y")]).unwrap();
        assert_eq!(folds.len(), 2);
        assert_eq!(folds[0].train_videos, vec!["b"]);
        assert_eq!(folds[0].test_videos, vec!["a"]);
    }

    #[test]
    fn single_subject_rejected() {
        let err = build_louo_folds(&[record("a", "X"), record("b", "X")]).unwrap_err();
        assert!(matches!(err, Error::SingleSubject(1)));
    }
}
