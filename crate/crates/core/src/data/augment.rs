//! Photometric and geometric augmentation of single `[1,H,W]` images.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CropMode {
    None,
    /// Reflect-pad by this many pixels and crop back to the original size.
    ReflectPad(usize),
    /// Crop a square of this side and resize it back bilinearly.
    ResizedCrop(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub crop: CropMode,
    pub flip_prob: f64,
    /// Shift drawn from `U(-brightness, brightness)`.
    pub brightness: f64,
    /// Scale drawn from `U(1 - contrast, 1 + contrast)`.
    pub contrast: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { crop: CropMode::ReflectPad(4), flip_prob: 0.5, brightness: 0.2, contrast: 0.2 }
    }
}

impl AugmentConfig {
    pub fn identity() -> Self {
        Self { crop: CropMode::None, flip_prob: 0.0, brightness: 0.0, contrast: 0.0 }
    }

    /// Crop 56/64 of the side then resize back, plus flip and jitter.
    pub fn contrastive(image_size: usize) -> Self {
        Self { crop: CropMode::ResizedCrop(image_size * 7 / 8), ..Self::default() }
    }
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}

fn bilinear(src: &[f64], sh: usize, sw: usize, y: f64, x: f64) -> f64 {
    let y0 = (y.floor() as usize).min(sh - 1);
    let x0 = (x.floor() as usize).min(sw - 1);
    let (y1, x1) = ((y0 + 1).min(sh - 1), (x0 + 1).min(sw - 1));
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    let at = |r: usize, c: usize| src[r * sw + c];
    (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1.0 - fx) * at(y1, x0) + fx * at(y1, x1))
}

/// Applies, in order: crop, horizontal flip, contrast about the image mean,
/// brightness shift; the result is clamped to `[-1,1]`. Randomness comes only
/// from `rng`; disabled components draw nothing.
pub fn augment(image: &Tensor, cfg: &AugmentConfig, rng: &mut impl Rng) -> Result<Tensor> {
    let &[1, h, w] = image.shape() else {
        return shape_err(format!("augment expects [1,H,W], got {:?}", image.shape()));
    };
    let mut px = image.to_vec();
    match cfg.crop {
        CropMode::None | CropMode::ReflectPad(0) => {}
        CropMode::ReflectPad(p) => {
            let dy = rng.random_range(0..=2 * p) as isize - p as isize;
            let dx = rng.random_range(0..=2 * p) as isize - p as isize;
            let src = px.clone();
            for r in 0..h {
                for c in 0..w {
                    px[r * w + c] = src[reflect(r as isize + dy, h) * w + reflect(c as isize + dx, w)];
                }
            }
        }
        CropMode::ResizedCrop(side) => {
            let side = side.clamp(1, h.min(w));
            if side < h.min(w) || h != w {
                let y0 = rng.random_range(0..=h - side);
                let x0 = rng.random_range(0..=w - side);
                let src = px.clone();
                // align corners of the crop with the corners of the output
                let sy = if h > 1 { (side - 1) as f64 / (h - 1) as f64 } else { 0.0 };
                let sx = if w > 1 { (side - 1) as f64 / (w - 1) as f64 } else { 0.0 };
                for r in 0..h {
                    for c in 0..w {
                        px[r * w + c] = bilinear(&src, h, w, y0 as f64 + r as f64 * sy, x0 as f64 + c as f64 * sx);
                    }
                }
            }
        }
    }
    if cfg.flip_prob > 0.0 && rng.random_bool(cfg.flip_prob.min(1.0)) {
        px.chunks_mut(w).for_each(|row| row.reverse());
    }
    if cfg.contrast > 0.0 {
        let k = rng.random_range(1.0 - cfg.contrast..=1.0 + cfg.contrast);
        let mean = px.iter().sum::<f64>() / px.len() as f64;
        px.iter_mut().for_each(|v| *v = mean + k * (*v - mean));
    }
    if cfg.brightness > 0.0 {
        let b = rng.random_range(-cfg.brightness..=cfg.brightness);
        px.iter_mut().for_each(|v| *v += b);
    }
    px.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
    Tensor::new(px, &[1, h, w])
}
