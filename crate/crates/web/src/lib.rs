//! Browser bindings for three small interactive pieces of the pipeline:
//! rendering a synthetic slice, re-normalizing one image to another's
//! statistics, and measuring how demodulation holds a convolution's output
//! scale fixed under arbitrary style scales.

use adasin::data::{render_slice, Bias};
use adasin::nn::{adasin, modulated_conv2d, StructureFeature};
use adasin::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use wasm_bindgen::prelude::*;

fn parse_bias(texture: &str) -> adasin::Result<Bias> {
    match texture {
        "A" | "a" => Ok(Bias::A),
        "B" | "b" => Ok(Bias::B),
        other => Err(adasin::Error::InvalidArgument(format!("texture must be A or B, got {other:?}"))),
    }
}

/// Pixels in `[-1, 1]`, row-major, followed by the lesion mask.
pub fn slice_pixels(size: usize, class: usize, texture: &str, seed: u64) -> adasin::Result<(Vec<f64>, Vec<f64>)> {
    let r = render_slice(size, class, parse_bias(texture)?, seed, 0)?;
    let mask = r.lesion_mask.map(|m| m.to_vec()).unwrap_or_default();
    Ok((r.image.to_vec(), mask))
}

fn as_feature(px: &[f64], size: usize) -> adasin::Result<StructureFeature> {
    StructureFeature::new(Tensor::new(px.to_vec(), &[1, 1, size, size])?)
}

/// Treats both images as single-channel feature maps and moves `content`
/// onto the mean and standard deviation of `style`.
pub fn adasin_pixels(content: &[f64], style: &[f64], size: usize) -> adasin::Result<Vec<f64>> {
    Ok(adasin(&as_feature(content, size)?, &as_feature(style, size)?)?.into_tensor().to_vec())
}

/// `[mean, std]` of an image.
pub fn pixel_stats(px: &[f64]) -> [f64; 2] {
    let n = px.len().max(1) as f64;
    let mean = px.iter().sum::<f64>() / n;
    [mean, (px.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()]
}

/// Output standard deviation of a modulated 3x3 convolution on unit-normal
/// input and He-scaled weights, with style scales drawn from `[0.1, 3]`.
pub fn modulated_std(channels: usize, size: usize, demodulate: bool, seed: u64) -> adasin::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fn normal(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)).collect()
    }
    let (n, k) = (4, 3);
    let input = Tensor::new(normal(&mut rng, n * channels * size * size, 1.0), &[n, channels, size, size])?;
    let fan_in = (channels * k * k) as f64;
    let weight = Tensor::new(normal(&mut rng, channels * channels * k * k, fan_in.recip().sqrt()), &[channels, channels, k, k])?;
    let scales: Vec<f64> = (0..n * channels).map(|_| rng.random_range(0.1..3.0)).collect();
    let out = modulated_conv2d(&input, &weight, &Tensor::new(scales, &[n, channels])?, demodulate)?;
    Ok(pixel_stats(&out.to_vec())[1])
}

fn js(e: adasin::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Slice {
    pixels: Vec<f64>,
    mask: Vec<f64>,
}

#[wasm_bindgen]
impl Slice {
    #[wasm_bindgen(getter)]
    pub fn pixels(&self) -> Vec<f64> {
        self.pixels.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn mask(&self) -> Vec<f64> {
        self.mask.clone()
    }
}

#[wasm_bindgen(js_name = synthSlice)]
pub fn synth_slice(size: usize, class: usize, texture: &str, seed: u32) -> Result<Slice, JsError> {
    let (pixels, mask) = slice_pixels(size, class, texture, seed as u64).map_err(js)?;
    Ok(Slice { pixels, mask })
}

#[wasm_bindgen(js_name = adasinImage)]
pub fn adasin_image(content: &[f64], style: &[f64], size: usize) -> Result<Vec<f64>, JsError> {
    adasin_pixels(content, style, size).map_err(js)
}

#[wasm_bindgen(js_name = imageStats)]
pub fn image_stats(px: &[f64]) -> Vec<f64> {
    pixel_stats(px).to_vec()
}

#[wasm_bindgen(js_name = modulatedStd)]
pub fn modulated_std_js(channels: usize, size: usize, demodulate: bool, seed: u32) -> Result<f64, JsError> {
    modulated_std(channels, size, demodulate, seed as u64).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_shape_and_range() {
        let (px, mask) = slice_pixels(32, 1, "B", 3).unwrap();
        assert_eq!(px.len(), 32 * 32);
        assert_eq!(mask.len(), 32 * 32);
        assert!(px.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(mask.iter().any(|&m| m == 1.0));
        assert!(slice_pixels(32, 2, "A", 3).is_err());
        assert!(slice_pixels(32, 0, "C", 3).is_err());
    }

    #[test]
    fn adasin_moves_statistics() {
        let (a, _) = slice_pixels(32, 0, "A", 1).unwrap();
        let (b, _) = slice_pixels(32, 1, "B", 2).unwrap();
        let out = adasin_pixels(&a, &b, 32).unwrap();
        let (so, sb) = (pixel_stats(&out), pixel_stats(&b));
        assert!((so[0] - sb[0]).abs() < 1e-5);
        assert!((so[1] - sb[1]).abs() < 1e-5);
        assert!(adasin_pixels(&a, &b[..10], 32).is_err());
    }

    #[test]
    fn demodulation_keeps_unit_scale() {
        let s = modulated_std(16, 8, true, 5).unwrap();
        assert!((0.85..=1.15).contains(&s), "{s}");
        let raw = modulated_std(16, 8, false, 5).unwrap();
        assert!((raw - 1.0).abs() > 0.2, "{raw}");
    }
}
