use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use image::imageops::FilterType;
use image::RgbImage;

use crate::{Error, Result};

/// Random access to decoded video frames by native frame index.
pub trait FrameSource: Send + Sync {
    fn frame(&self, native_index: usize) -> Result<Arc<RgbImage>>;
}

/// Frames stored as `<dir>/<index:06>.png` (or `.jpg`), one file per native
/// frame, 0-based. Decoded frames are cached, optionally downscaled so that
/// the shorter side equals `short_side`.
pub struct DirFrameSource {
    dir: PathBuf,
    short_side: Option<u32>,
    cache: RwLock<HashMap<usize, Arc<RgbImage>>>,
}

impl DirFrameSource {
    pub fn new(dir: impl Into<PathBuf>, short_side: Option<u32>) -> Self {
        Self {
            dir: dir.into(),
            short_side,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn frame_path(dir: &Path, native_index: usize, ext: &str) -> PathBuf {
        dir.join(format!("{native_index:06}.{ext}"))
    }

    fn load(&self, native_index: usize) -> Result<RgbImage> {
        let mut last_err = None;
        for ext in ["png", "jpg"] {
            let path = Self::frame_path(&self.dir, native_index, ext);
            if !path.exists() {
                continue;
            }
            match image::open(&path) {
                Ok(img) => return Ok(resize_short_side(img.into_rgb8(), self.short_side)),
                Err(source) => last_err = Some(Error::Image { path, source }),
            }
        }
        Err(last_err.unwrap_or_else(|| {
            Error::io(
                Self::frame_path(&self.dir, native_index, "png"),
                std::io::Error::new(std::io::ErrorKind::NotFound, "frame not found"),
            )
        }))
    }
}

impl FrameSource for DirFrameSource {
    fn frame(&self, native_index: usize) -> Result<Arc<RgbImage>> {
        if let Some(img) = self.cache.read().unwrap().get(&native_index) {
            return Ok(Arc::clone(img));
        }
        let img = Arc::new(self.load(native_index)?);
        self.cache.write().unwrap().insert(native_index, Arc::clone(&img));
        Ok(img)
    }
}

/// In-memory frames, mostly for tests.
pub struct MemoryFrameSource {
    frames: Vec<Arc<RgbImage>>,
}

impl MemoryFrameSource {
    pub fn new(frames: Vec<RgbImage>) -> Self {
        Self {
            frames: frames.into_iter().map(Arc::new).collect(),
        }
    }
}

impl FrameSource for MemoryFrameSource {
    fn frame(&self, native_index: usize) -> Result<Arc<RgbImage>> {
        self.frames.get(native_index).cloned().ok_or_else(|| {
            Error::io(
                format!("<memory>/{native_index}"),
                std::io::Error::new(std::io::ErrorKind::NotFound, "frame not found"),
            )
        })
    }
}

fn resize_short_side(img: RgbImage, short_side: Option<u32>) -> RgbImage {
    let Some(side) = short_side else { return img };
    let (w, h) = img.dimensions();
    let short = w.min(h);
    if short == side {
        return img;
    }
    let nw = ((w as u64 * side as u64 + short as u64 / 2) / short as u64).max(1) as u32;
    let nh = ((h as u64 * side as u64 + short as u64 / 2) / short as u64).max(1) as u32;
    image::imageops::resize(&img, nw, nh, FilterType::Triangle)
}
