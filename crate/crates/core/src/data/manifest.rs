use std::path::{Path, PathBuf};

use crate::util::{read_to_string, write_atomic};
use crate::{Error, Result};

/// One video of the dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoRecord {
    pub video_id: String,
    pub subject_id: String,
    pub frame_count_native: usize,
    pub native_fps: u32,
    pub transcript: PathBuf,
    pub frame_dir: PathBuf,
}

/// Tab-separated list of videos. Relative paths are resolved against the
/// manifest's directory when loading.
///
/// ```text
/// video_id  subject_id  frame_count  fps  transcript  frame_dir
/// Suturing_B001  B  1000  30  transcriptions/Suturing_B001.txt  frames/Suturing_B001
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub records: Vec<VideoRecord>,
}

const HEADER: [&str; 6] = [
    "video_id",
    "subject_id",
    "frame_count",
    "fps",
    "transcript",
    "frame_dir",
];

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut manifest = Self::parse(&text, &path.display().to_string())?;
        for r in &mut manifest.records {
            if r.transcript.is_relative() {
                r.transcript = base.join(&r.transcript);
            }
            if r.frame_dir.is_relative() {
                r.frame_dir = base.join(&r.frame_dir);
            }
        }
        Ok(manifest)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields == HEADER {
                continue;
            }
            let bad = |msg: &str| Error::format(origin, format!("line {}: {msg}", n + 1));
            if fields.len() != HEADER.len() {
                return Err(bad("expected 6 tab-separated fields"));
            }
            let frame_count_native: usize = fields[2].parse().map_err(|_| bad("bad frame_count"))?;
            let native_fps: u32 = fields[3].parse().map_err(|_| bad("bad fps"))?;
            if frame_count_native == 0 || native_fps == 0 {
                return Err(bad("frame_count and fps must be positive"));
            }
            records.push(VideoRecord {
                video_id: fields[0].to_string(),
                subject_id: fields[1].to_string(),
                frame_count_native,
                native_fps,
                transcript: PathBuf::from(fields[4]),
                frame_dir: PathBuf::from(fields[5]),
            });
        }
        let mut ids: Vec<&str> = records.iter().map(|r| r.video_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(dup) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::format(origin, format!("duplicate video id `{}`", dup[0])));
        }
        Ok(Self { records })
    }

    pub fn render(&self) -> String {
        let mut out = HEADER.join("\t");
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                r.video_id,
                r.subject_id,
                r.frame_count_native,
                r.native_fps,
                r.transcript.display(),
                r.frame_dir.display()
            ));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render().as_bytes())
    }

    pub fn get(&self, video_id: &str) -> Option<&VideoRecord> {
        self.records.iter().find(|r| r.video_id == video_id)
    }
}
