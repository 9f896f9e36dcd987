//! Deterministic synthetic gesture videos.
//!
//! Each class has a visual code. Motion-coded classes come in pairs that share
//! one static appearance (a striped pattern on a pair-specific background) and
//! differ only in the direction the stripes travel, so a single frame cannot
//! tell them apart. The remaining classes are flat colours with a dark square.
//! Frames are rendered at native rate and written as PNG files alongside
//! JIGSAWS-style transcripts and a manifest.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    build_label_sequence, render_transcript, GestureVocabulary, LabelSequence, Manifest, Segment, VideoData,
    VideoRecord,
};
use crate::util::write_atomic;
use crate::{Error, Result};

const PAIR_BACKGROUNDS: [[u8; 3]; 3] = [[128, 128, 128], [150, 120, 90], [90, 120, 150]];
const STATIC_COLORS: [[u8; 3]; 8] = [
    [200, 40, 40],
    [40, 170, 60],
    [40, 70, 200],
    [210, 190, 40],
    [170, 60, 190],
    [40, 180, 180],
    [230, 120, 30],
    [110, 70, 40],
];
/// Stripe period at a 112-pixel frame width.
const STRIPE_PERIOD: f32 = 48.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub videos_per_subject: usize,
    pub num_classes: usize,
    /// Number of motion-coded class pairs; classes `2p` and `2p + 1` form pair `p`.
    pub motion_pairs: usize,
    pub native_fps: u32,
    pub working_fps: u32,
    pub segments_per_video: usize,
    /// Mean segment length in working-rate frames.
    pub mean_segment_len: usize,
    /// Segment lengths are drawn uniformly from `mean ± jitter`.
    pub segment_jitter: usize,
    pub frame_size: u32,
    /// Stripe displacement per native frame, in pixels at a 112-pixel frame.
    pub speed: f32,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_subjects: 2,
            videos_per_subject: 2,
            num_classes: 6,
            motion_pairs: 2,
            native_fps: 30,
            working_fps: 5,
            segments_per_video: 12,
            mean_segment_len: 12,
            segment_jitter: 4,
            frame_size: 112,
            speed: 2.0,
            seed: 0,
        }
    }
}

/// Appearance and motion of one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VisualCode {
    /// Stripes on `background`; `horizontal_motion` selects vertical stripes
    /// sliding sideways (otherwise horizontal stripes sliding up or down) and
    /// `direction` is +1 or -1.
    Stripes {
        background: [u8; 3],
        horizontal_motion: bool,
        direction: f32,
    },
    Flat {
        color: [u8; 3],
    },
}

impl VisualCode {
    pub fn is_motion(&self) -> bool {
        matches!(self, Self::Stripes { .. })
    }
}

/// One planned segment with the stripe phase it starts with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSegment {
    pub segment: Segment,
    pub phase: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub video_id: String,
    pub subject_id: String,
    pub index: usize,
    pub frame_count_native: usize,
    /// Brightness offset shared by all videos of the subject.
    pub brightness: i32,
    pub segments: Vec<SynthSegment>,
}

impl SynthVideo {
    pub fn transcript_segments(&self) -> Vec<Segment> {
        self.segments.iter().map(|s| s.segment).collect()
    }
}

/// Paths and contents of a generated dataset.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub root: PathBuf,
    pub manifest_path: PathBuf,
    pub vocab_path: PathBuf,
    pub manifest: Manifest,
    pub vocab: GestureVocabulary,
    pub videos: Vec<SynthVideo>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.n_subjects,
            self.videos_per_subject,
            self.num_classes,
            self.segments_per_video,
            self.mean_segment_len,
            self.frame_size as usize,
            self.working_fps as usize,
        ];
        if positive.contains(&0) {
            return Err(Error::InvalidConfig("synthetic spec sizes must be positive".into()));
        }
        if self.segment_jitter >= self.mean_segment_len {
            return Err(Error::InvalidConfig(
                "segment jitter must be below the mean length".into(),
            ));
        }
        if self.motion_pairs > PAIR_BACKGROUNDS.len() || 2 * self.motion_pairs > self.num_classes {
            return Err(Error::InvalidConfig(format!(
                "{} motion pairs do not fit",
                self.motion_pairs
            )));
        }
        if self.num_classes - 2 * self.motion_pairs > STATIC_COLORS.len() {
            return Err(Error::InvalidConfig(format!(
                "at most {} classes are available",
                2 * self.motion_pairs + STATIC_COLORS.len()
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidConfig("at least two classes are required".into()));
        }
        if !self.native_fps.is_multiple_of(self.working_fps) {
            return Err(Error::RateMismatch {
                native: self.native_fps,
                working: self.working_fps,
            });
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> GestureVocabulary {
        GestureVocabulary::numbered(self.num_classes)
    }

    pub fn visual_code(&self, class: usize) -> VisualCode {
        if class < 2 * self.motion_pairs {
            let pair = class / 2;
            VisualCode::Stripes {
                background: PAIR_BACKGROUNDS[pair],
                horizontal_motion: pair.is_multiple_of(2),
                direction: if class.is_multiple_of(2) { 1.0 } else { -1.0 },
            }
        } else {
            VisualCode::Flat {
                color: STATIC_COLORS[class - 2 * self.motion_pairs],
            }
        }
    }

    /// Classes `(2p, 2p + 1)` for every motion pair `p`.
    pub fn motion_pair_classes(&self) -> Vec<(usize, usize)> {
        (0..self.motion_pairs).map(|p| (2 * p, 2 * p + 1)).collect()
    }

    fn subject_name(s: usize) -> String {
        let mut name = String::new();
        let mut n = s;
        loop {
            name.insert(0, (b'A' + (n % 26) as u8) as char);
            if n < 26 {
                break;
            }
            n = n / 26 - 1;
        }
        name
    }

    /// Segment layout of every video, without rendering.
    pub fn plan(&self) -> Result<Vec<SynthVideo>> {
        self.validate()?;
        let stride = (self.native_fps / self.working_fps) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut videos = Vec::new();
        for s in 0..self.n_subjects {
            let subject = Self::subject_name(s);
            let brightness = rng.random_range(-20..=20);
            for v in 0..self.videos_per_subject {
                let mut segments = Vec::with_capacity(self.segments_per_video);
                let mut start = 0;
                let mut prev = None;
                for _ in 0..self.segments_per_video {
                    let len = rng.random_range(
                        self.mean_segment_len - self.segment_jitter..=self.mean_segment_len + self.segment_jitter,
                    ) * stride;
                    let class = loop {
                        let c = rng.random_range(0..self.num_classes);
                        if Some(c) != prev {
                            break c;
                        }
                    };
                    prev = Some(class);
                    segments.push(SynthSegment {
                        segment: Segment {
                            start,
                            end: start + len - 1,
                            class,
                        },
                        phase: rng.random_range(0.0..STRIPE_PERIOD),
                    });
                    start += len;
                }
                videos.push(SynthVideo {
                    video_id: format!("Synth_{subject}{:03}", v + 1),
                    subject_id: subject.clone(),
                    index: videos.len(),
                    frame_count_native: start,
                    brightness,
                    segments,
                });
            }
        }
        Ok(videos)
    }

    /// Renders native frame `n` of `video`.
    pub fn render_frame(&self, video: &SynthVideo, n: usize) -> RgbImage {
        let seg = video
            .segments
            .iter()
            .find(|s| s.segment.start <= n && n <= s.segment.end)
            .or(video.segments.last())
            .expect("video has segments");
        let size = self.frame_size;
        let scale = size as f32 / 112.0;
        let mut flicker_rng = ChaCha8Rng::seed_from_u64(self.seed ^ ((video.index as u64) << 32) ^ n as u64);
        let offset = video.brightness + flicker_rng.random_range(-6..=6);
        let adjust = |c: [u8; 3]| Rgb(c.map(|v| (v as i32 + offset).clamp(0, 255) as u8));
        match self.visual_code(seg.segment.class) {
            VisualCode::Stripes {
                background,
                horizontal_motion,
                direction,
            } => {
                let period = STRIPE_PERIOD * scale;
                let shift = (seg.phase + direction * self.speed * (n - seg.segment.start) as f32) * scale;
                let (bg, fg) = (adjust(background), adjust([235, 235, 235]));
                RgbImage::from_fn(size, size, |x, y| {
                    let coord = if horizontal_motion { x } else { y } as f32;
                    if (coord - shift).rem_euclid(period) < period / 2.0 {
                        fg
                    } else {
                        bg
                    }
                })
            }
            VisualCode::Flat { color } => {
                let (bg, fg) = (adjust(color), adjust([30, 30, 30]));
                let (lo, hi) = (size / 3, 2 * size / 3);
                RgbImage::from_fn(size, size, |x, y| {
                    if (lo..hi).contains(&x) && (lo..hi).contains(&y) {
                        fg
                    } else {
                        bg
                    }
                })
            }
        }
    }
}

fn is_empty_dir(dir: &Path) -> Result<bool> {
    match std::fs::read_dir(dir) {
        Ok(mut it) => Ok(it.next().is_none()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(true),
        Err(e) => Err(Error::io(dir, e)),
    }
}

/// Writes `manifest.tsv`, `vocab.tsv`, `transcripts/<id>.txt` and
/// `frames/<id>/<nnnnnn>.png` under `out_dir`.
pub fn generate_dataset(spec: &SynthSpec, out_dir: &Path, overwrite: bool) -> Result<SynthDataset> {
    let videos = spec.plan()?;
    if !overwrite && !is_empty_dir(out_dir)? {
        return Err(Error::InvalidConfig(format!("{} is not empty", out_dir.display())));
    }
    let vocab = spec.vocabulary();
    for sub in ["transcripts", "frames"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    videos.par_iter().try_for_each(|video| -> Result<()> {
        let frame_dir = out_dir.join("frames").join(&video.video_id);
        std::fs::create_dir_all(&frame_dir).map_err(|e| Error::io(&frame_dir, e))?;
        for n in 0..video.frame_count_native {
            let path = crate::data::DirFrameSource::frame_path(&frame_dir, n, "png");
            spec.render_frame(video, n).save(&path).map_err(|source| Error::Image {
                path: path.clone(),
                source,
            })?;
        }
        let transcript = out_dir.join("transcripts").join(format!("{}.txt", video.video_id));
        write_atomic(
            &transcript,
            render_transcript(&video.transcript_segments(), &vocab).as_bytes(),
        )
    })?;
    let records = videos
        .iter()
        .map(|v| VideoRecord {
            video_id: v.video_id.clone(),
            subject_id: v.subject_id.clone(),
            frame_count_native: v.frame_count_native,
            native_fps: spec.native_fps,
            transcript: PathBuf::from("transcripts").join(format!("{}.txt", v.video_id)),
            frame_dir: PathBuf::from("frames").join(&v.video_id),
        })
        .collect();
    let manifest = Manifest { records };
    let manifest_path = out_dir.join("manifest.tsv");
    manifest.save(&manifest_path)?;
    let vocab_path = out_dir.join("vocab.tsv");
    write_atomic(&vocab_path, vocab.render().as_bytes())?;
    write_atomic(
        &out_dir.join("synth_spec.json"),
        serde_json::to_string_pretty(spec)?.as_bytes(),
    )?;
    Ok(SynthDataset {
        root: out_dir.to_path_buf(),
        manifest: Manifest::load(&manifest_path)?,
        manifest_path,
        vocab_path,
        vocab,
        videos,
    })
}

/// Ground-truth labels of a generated video at the generator's working rate,
/// computed from the generator's plan rather than from files.
pub fn oracle_labels(spec: &SynthSpec, video_id: &str) -> Result<LabelSequence> {
    let video = spec
        .plan()?
        .into_iter()
        .find(|v| v.video_id == video_id)
        .ok_or_else(|| Error::UnknownVideo(video_id.to_string()))?;
    build_label_sequence(
        video_id,
        &video.transcript_segments(),
        video.frame_count_native,
        spec.native_fps,
        spec.working_fps,
    )
}

const HIST_BINS: usize = 16;

fn color_histogram(img: &RgbImage) -> Vec<f64> {
    let mut h = vec![0.0; 3 * HIST_BINS];
    for p in img.pixels() {
        for c in 0..3 {
            h[c * HIST_BINS + p[c] as usize * HIST_BINS / 256] += 1.0;
        }
    }
    let n = (img.width() * img.height()) as f64;
    h.iter_mut().for_each(|v| *v /= n);
    h
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Result of the single-frame colour-histogram probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    /// Accuracy over frames of flat-colour classes, choosing among all classes.
    pub color_accuracy: f64,
    /// Per motion pair, accuracy of choosing between the pair's two classes.
    pub pair_accuracy: Vec<f64>,
}

/// Nearest-centroid classifier on per-channel colour histograms of single
/// frames. Centroids are fitted on `fit` videos and scored on `test` videos,
/// both at the generator's working rate.
pub fn histogram_probe(spec: &SynthSpec, fit: &[&VideoData], test: &[&VideoData]) -> Result<ProbeReport> {
    let frames = |videos: &[&VideoData]| -> Result<Vec<(Vec<f64>, usize)>> {
        let mut out = Vec::new();
        for v in videos {
            let labels = v.labels_at(spec.working_fps)?;
            for t in labels.labeled_frames() {
                if let Some(c) = labels.labels[t] {
                    out.push((color_histogram(v.frames.frame(labels.native_frame(t))?.as_ref()), c));
                }
            }
        }
        Ok(out)
    };
    let train = frames(fit)?;
    let mut centroids = vec![(vec![0.0; 3 * HIST_BINS], 0usize); spec.num_classes];
    for (h, c) in &train {
        let (sum, n) = &mut centroids[*c];
        sum.iter_mut().zip(h).for_each(|(s, v)| *s += v);
        *n += 1;
    }
    let centroids: Vec<Option<Vec<f64>>> = centroids
        .into_iter()
        .map(|(sum, n)| (n > 0).then(|| sum.into_iter().map(|v| v / n as f64).collect()))
        .collect();
    let nearest = |h: &[f64], classes: &[usize]| {
        classes
            .iter()
            .filter_map(|&c| centroids[c].as_ref().map(|m| (c, l1(h, m))))
            .fold(None, |best: Option<(usize, f64)>, (c, d)| match best {
                Some((_, bd)) if bd <= d => best,
                _ => Some((c, d)),
            })
            .map(|(c, _)| c)
    };
    let all: Vec<usize> = (0..spec.num_classes).collect();
    let test = frames(test)?;
    let ratio = |hits: usize, n: usize| if n == 0 { f64::NAN } else { hits as f64 / n as f64 };
    let (mut hits, mut n) = (0, 0);
    for (h, c) in test.iter().filter(|(_, c)| !spec.visual_code(*c).is_motion()) {
        hits += usize::from(nearest(h, &all) == Some(*c));
        n += 1;
    }
    let color_accuracy = ratio(hits, n);
    let pair_accuracy = spec
        .motion_pair_classes()
        .into_iter()
        .map(|(a, b)| {
            let (mut hits, mut n) = (0, 0);
            for (h, c) in test.iter().filter(|(_, c)| *c == a || *c == b) {
                hits += usize::from(nearest(h, &[a, b]) == Some(*c));
                n += 1;
            }
            ratio(hits, n)
        })
        .collect();
    Ok(ProbeReport {
        color_accuracy,
        pair_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_counts_and_tiling() {
        let spec = SynthSpec::default();
        let videos = spec.plan().unwrap();
        assert_eq!(videos.len(), 4);
        for v in &videos {
            assert_eq!(v.segments[0].segment.start, 0);
            for w in v.segments.windows(2) {
                assert_eq!(w[1].segment.start, w[0].segment.end + 1);
                assert_ne!(w[1].segment.class, w[0].segment.class);
            }
            assert_eq!(v.segments.last().unwrap().segment.end + 1, v.frame_count_native);
        }
        assert_eq!(videos[0].video_id, "Synth_A001");
        assert_eq!(videos[3].video_id, "Synth_B002");
        assert_eq!(spec.plan().unwrap(), videos);
    }

    #[test]
    fn pair_frames_share_appearance() {
        let spec = SynthSpec::default();
        let a = spec.visual_code(0);
        let b = spec.visual_code(1);
        match (a, b) {
            (
                VisualCode::Stripes {
                    background: ba,
                    horizontal_motion: ha,
                    direction: da,
                },
                VisualCode::Stripes {
                    background: bb,
                    horizontal_motion: hb,
                    direction: db,
                },
            ) => {
                assert_eq!((ba, ha), (bb, hb));
                assert_eq!(da, -db);
            }
            _ => panic!("classes 0 and 1 are motion coded"),
        }
        assert!(!spec.visual_code(5).is_motion());
    }

    #[test]
    fn stripes_move_in_opposite_directions() {
        let spec = SynthSpec::default();
        let mk = |class| SynthVideo {
            video_id: "v".into(),
            subject_id: "A".into(),
            index: 0,
            frame_count_native: 10,
            brightness: 0,
            segments: vec![SynthSegment {
                segment: Segment {
                    start: 0,
                    end: 9,
                    class,
                },
                phase: 0.0,
            }],
        };
        let (right, left) = (mk(0), mk(1));
        let row = |v: &SynthVideo, n| -> Vec<bool> {
            let f = spec.render_frame(v, n);
            (0..112).map(|x| f.get_pixel(x, 50)[0] > 200).collect()
        };
        // same first frame up to flicker, then diverging
        assert_eq!(row(&right, 0), row(&left, 0));
        let r6: Vec<bool> = row(&right, 6);
        let l6: Vec<bool> = row(&left, 6);
        assert_ne!(r6, l6);
        let r0 = row(&right, 0);
        assert_eq!(r6[20..100], r0[8..88]);
    }

    #[test]
    fn too_many_classes_rejected() {
        let spec = SynthSpec {
            num_classes: 13,
            ..SynthSpec::default()
        };
        assert!(spec.validate().is_err());
    }
}
