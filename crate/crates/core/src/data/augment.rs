use image::imageops::{self, FilterType};
use ndarray::Array4;
use rand::Rng;

use super::{RawSnippet, Snippet};

/// Crop sides as fractions of the shorter frame side.
pub const SCALE_JITTER: [f32; 4] = [1.0, 0.875, 0.75, 0.66];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corner {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
    Center,
}

impl Corner {
    pub const ALL: [Corner; 5] = [
        Corner::TopLeft,
        Corner::TopRight,
        Corner::BottomLeft,
        Corner::BottomRight,
        Corner::Center,
    ];
}

/// Geometric parameters shared by all frames of one snippet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropParams {
    pub scale: f32,
    pub corner: Corner,
    pub flip: bool,
}

impl CropParams {
    pub fn center() -> Self {
        Self {
            scale: 1.0,
            corner: Corner::Center,
            flip: false,
        }
    }

    /// Square crop `(x, y, side)` inside a `width × height` frame.
    pub fn crop_box(&self, width: u32, height: u32) -> (u32, u32, u32) {
        let short = width.min(height);
        let side = ((self.scale * short as f32).round() as u32).clamp(1, short);
        let (max_x, max_y) = (width - side, height - side);
        let (x, y) = match self.corner {
            Corner::TopLeft => (0, 0),
            Corner::TopRight => (max_x, 0),
            Corner::BottomLeft => (0, max_y),
            Corner::BottomRight => (max_x, max_y),
            Corner::Center => (max_x / 2, max_y / 2),
        };
        (x, y, side)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub scales: Vec<f32>,
    /// Horizontal flips mirror motion direction, so they are off unless asked for.
    pub flip: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            scales: SCALE_JITTER.to_vec(),
            flip: false,
        }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> CropParams {
        if !self.enabled {
            return CropParams::center();
        }
        let scale = self.scales[rng.random_range(0..self.scales.len())];
        let corner = Corner::ALL[rng.random_range(0..Corner::ALL.len())];
        let flip = self.flip && rng.random_bool(0.5);
        CropParams { scale, corner, flip }
    }
}

/// Crop, resize and per-channel normalisation into network input.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTransform {
    pub input_size: u32,
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl Default for FrameTransform {
    fn default() -> Self {
        Self::with_size(224)
    }
}

impl FrameTransform {
    /// ImageNet channel statistics.
    pub fn with_size(input_size: u32) -> Self {
        Self {
            input_size,
            mean: [0.485, 0.456, 0.406],
            std: [0.229, 0.224, 0.225],
        }
    }

    /// Frames are cached with this shorter side, the 256/224 ratio of the
    /// usual resize-then-crop pipeline.
    pub fn load_short_side(&self) -> u32 {
        (self.input_size as f32 * 256.0 / 224.0).round() as u32
    }

    pub fn apply(&self, raw: &RawSnippet, params: CropParams) -> Snippet {
        let s = self.input_size as usize;
        let mut out = Array4::<f32>::zeros((3, raw.frames.len(), s, s));
        for (t, frame) in raw.frames.iter().enumerate() {
            let (x, y, side) = params.crop_box(frame.width(), frame.height());
            let cropped = imageops::crop_imm(frame.as_ref(), x, y, side, side).to_image();
            let mut resized = if side == self.input_size {
                cropped
            } else {
                imageops::resize(&cropped, self.input_size, self.input_size, FilterType::Triangle)
            };
            if params.flip {
                imageops::flip_horizontal_in_place(&mut resized);
            }
            for (px, py, p) in resized.enumerate_pixels() {
                for c in 0..3 {
                    out[[c, t, py as usize, px as usize]] = (p.0[c] as f32 / 255.0 - self.mean[c]) / self.std[c];
                }
            }
        }
        Snippet {
            frames: out,
            labels: raw.labels.clone(),
            anchor_t: raw.anchor_t,
        }
    }
}

/// Draws one set of crop parameters and applies it to every frame.
pub fn augment_snippet<R: Rng + ?Sized>(
    raw: &RawSnippet,
    rng: &mut R,
    config: &AugmentConfig,
    transform: &FrameTransform,
) -> Snippet {
    let params = config.draw(rng);
    transform.apply(raw, params)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use image::RgbImage;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn gradient_frame(w: u32, h: u32, shift: u8) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            image::Rgb([(x * 255 / w) as u8, (y * 255 / h) as u8, shift])
        })
    }

    fn raw(n: usize) -> RawSnippet {
        RawSnippet {
            frames: (0..n).map(|i| Arc::new(gradient_frame(40, 32, i as u8 * 10))).collect(),
            labels: (0..n).collect(),
            anchor_t: 99,
        }
    }

    #[test]
    fn scale_times_short_side() {
        let p = CropParams {
            scale: 0.75,
            corner: Corner::TopLeft,
            flip: false,
        };
        assert_eq!(p.crop_box(340, 256).2, 192);
        let p = CropParams {
            scale: 0.75,
            corner: Corner::BottomRight,
            flip: false,
        };
        assert_eq!(p.crop_box(340, 256), (148, 64, 192));
    }

    #[test]
    fn disabled_is_center_crop() {
        let r = raw(4);
        let t = FrameTransform::with_size(16);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = augment_snippet(&r, &mut rng, &AugmentConfig::disabled(), &t);
        let b = t.apply(&r, CropParams::center());
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.labels, r.labels);
    }

    #[test]
    fn one_draw_applies_to_all_frames() {
        // identical spatial content per frame (only the blue channel differs), so
        // identical geometry means identical red/green planes across time
        let r = raw(16);
        let t = FrameTransform::with_size(12);
        let cfg = AugmentConfig {
            flip: true,
            ..AugmentConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let s = augment_snippet(&r, &mut rng, &cfg, &t);
            for c in 0..2 {
                let first = s.frames.slice(ndarray::s![c, 0, .., ..]).to_owned();
                for f in 1..16 {
                    assert_eq!(s.frames.slice(ndarray::s![c, f, .., ..]), first);
                }
            }
        }
    }

    #[test]
    fn normalisation_uses_channel_stats() {
        let r = RawSnippet {
            frames: vec![Arc::new(RgbImage::from_pixel(4, 4, image::Rgb([255, 0, 128])))],
            labels: vec![0],
            anchor_t: 0,
        };
        let t = FrameTransform::with_size(4);
        let s = t.apply(&r, CropParams::center());
        assert!((s.frames[[0, 0, 0, 0]] - (1.0 - 0.485) / 0.229).abs() < 1e-6);
        assert!((s.frames[[1, 0, 0, 0]] - (0.0 - 0.456) / 0.224).abs() < 1e-6);
    }
}
