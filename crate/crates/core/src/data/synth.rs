//! Rendering of the two synthetic lesion classes and the two acquisition
//! textures that act as the spurious bias.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Bias, Provenance, SliceRecord, Split};
use crate::error::{invalid, Result};
use crate::tensor::Tensor;

const BACKGROUND: f64 = -1.0;
const LUNG: f64 = -0.6;
const BLOB_LEVEL: f64 = 0.6;
const PATCH_LEVEL: f64 = 0.5;

const A_CONTRAST: f64 = 1.3;
const A_NOISE_STD: f64 = 0.15;
const B_FIELD_AMPLITUDE: f64 = 0.25;
const B_OFFSET: f64 = 0.15;
const B_FIELD_GRID: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassCounts {
    pub class0: usize,
    pub class1: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasMode {
    /// Train/val: class 0 always A, class 1 always B. Test: mostly reversed.
    Confounded,
    /// Texture drawn independently of class with probability 1/2.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub image_size: usize,
    pub train: ClassCounts,
    pub val: ClassCounts,
    pub test: ClassCounts,
    /// Fraction of each test class rendered with the opposite texture.
    pub test_majority_fraction: f64,
    pub bias_mode: BiasMode,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            image_size: 64,
            train: ClassCounts { class0: 420, class1: 300 },
            val: ClassCounts { class0: 100, class1: 70 },
            test: ClassCounts { class0: 160, class1: 150 },
            test_majority_fraction: 0.85,
            bias_mode: BiasMode::Confounded,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.image_size < 16 {
            return invalid(format!("image_size {} too small to draw lesions", self.image_size));
        }
        for (name, c) in [("train", self.train), ("val", self.val), ("test", self.test)] {
            if c.class0 == 0 || c.class1 == 0 {
                return invalid(format!("{name} counts must be positive, got {c:?}"));
            }
        }
        if !(0.0..=1.0).contains(&self.test_majority_fraction) {
            return invalid(format!("test_majority_fraction {} outside [0,1]", self.test_majority_fraction));
        }
        Ok(())
    }

    pub fn counts(&self, split: Split) -> ClassCounts {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    pub fn total(&self) -> usize {
        Split::ALL.iter().map(|&s| self.counts(s).class0 + self.counts(s).class1).sum()
    }
}

fn slice_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Catmull-Rom upsampling of a `g x g` grid to `h x w`, corners aligned.
pub(crate) fn bicubic_upsample(grid: &[f64], g: usize, h: usize, w: usize) -> Vec<f64> {
    let cubic = |p: [f64; 4], t: f64| {
        p[1] + 0.5 * t * (p[2] - p[0] + t * (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3] + t * (3.0 * (p[1] - p[2]) + p[3] - p[0])))
    };
    let at = |r: isize, c: isize| grid[r.clamp(0, g as isize - 1) as usize * g + c.clamp(0, g as isize - 1) as usize];
    let scale = |i: usize, n: usize| if n > 1 { i as f64 * (g - 1) as f64 / (n - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        let y = scale(r, h);
        let (yi, ty) = (y.floor() as isize, y - y.floor());
        for c in 0..w {
            let x = scale(c, w);
            let (xi, tx) = (x.floor() as isize, x - x.floor());
            let rows = [-1, 0, 1, 2].map(|dy| cubic([-1, 0, 1, 2].map(|dx| at(yi + dy, xi + dx)), tx));
            out.push(cubic(rows, ty));
        }
    }
    out
}

/// Noise-free slice: pixels, lung membership in `[0,1]`, and the lesion mask.
pub(crate) struct CleanSlice {
    pub pixels: Vec<f64>,
    pub lung: Vec<f64>,
    pub mask: Vec<f64>,
}

pub(crate) fn render_clean(size: usize, class: usize, rng: &mut impl Rng) -> CleanSlice {
    let s = size as f64 / 64.0;
    let c0 = (size as f64 - 1.0) / 2.0;
    let (cy, cx) = (c0 + rng.random_range(-1.5..1.5) * s, c0 + rng.random_range(-1.5..1.5) * s);
    let ay = 0.43 * size as f64 * rng.random_range(0.95..1.05);
    let ax = 0.40 * size as f64 * rng.random_range(0.95..1.05);
    let n = size * size;
    let rho = |y: f64, x: f64| (((y - cy) / ay).powi(2) + ((x - cx) / ax).powi(2)).sqrt();
    let lung: Vec<f64> = (0..n)
        .map(|i| {
            let (y, x) = ((i / size) as f64, (i % size) as f64);
            (0.5 - (rho(y, x) - 1.0) * ay.min(ax)).clamp(0.0, 1.0)
        })
        .collect();

    let mut lesion = vec![0.0f64; n];
    let level;
    if class == 0 {
        level = BLOB_LEVEL;
        for _ in 0..rng.random_range(3..=6) {
            let r = rng.random_range(2.5..4.0) * s;
            // uniform point in the inner part of the ellipse
            let (t, u) = (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0f64..1.0).sqrt() * 0.65);
            let (by, bx) = (cy + u * ay * t.sin(), cx + u * ax * t.cos());
            for (i, v) in lesion.iter_mut().enumerate() {
                let d = (((i / size) as f64 - by).powi(2) + ((i % size) as f64 - bx).powi(2)).sqrt();
                *v = v.max((r - d + 0.5).clamp(0.0, 1.0));
            }
        }
    } else {
        level = PATCH_LEVEL;
        let grid: Vec<f64> = (0..36).map(|_| rng.random_range(0.6..1.0)).collect();
        let modulation = bicubic_upsample(&grid, 6, size, size);
        for _ in 0..rng.random_range(1..=3) {
            let sigma = rng.random_range(4.0..6.0) * s;
            let (t, u) = (rng.random_range(0.0..2.0 * PI), rng.random_range(0.7..0.85));
            let (py, px) = (cy + u * ay * t.sin(), cx + u * ax * t.cos());
            for (i, v) in lesion.iter_mut().enumerate() {
                let d2 = ((i / size) as f64 - py).powi(2) + ((i % size) as f64 - px).powi(2);
                *v = v.max((1.4 * (-d2 / (2.0 * sigma * sigma)).exp() * modulation[i]).clamp(0.0, 1.0));
            }
        }
    }
    let pixels: Vec<f64> = (0..n)
        .map(|i| {
            let inside = LUNG + lesion[i] * (level - LUNG);
            BACKGROUND * (1.0 - lung[i]) + inside * lung[i]
        })
        .collect();
    let mask = pixels.iter().map(|&v| if v >= 0.0 { 1.0 } else { 0.0 }).collect();
    CleanSlice { pixels, lung, mask }
}

/// Applies an acquisition texture inside the lung field and clamps.
pub(crate) fn apply_texture(clean: &CleanSlice, bias: Bias, rng: &mut impl Rng) -> Vec<f64> {
    let n = clean.pixels.len();
    let size = (n as f64).sqrt() as usize;
    let delta: Vec<f64> = match bias {
        Bias::A => {
            let noise = Normal::new(0.0, A_NOISE_STD).expect("valid std");
            clean.pixels.iter().map(|&v| (A_CONTRAST - 1.0) * v + noise.sample(rng)).collect()
        }
        Bias::B => {
            let g = B_FIELD_GRID;
            let grid: Vec<f64> = (0..g * g).map(|_| rng.random_range(-1.0..1.0)).collect();
            bicubic_upsample(&grid, g, size, size).into_iter().map(|f| B_OFFSET + B_FIELD_AMPLITUDE * f).collect()
        }
    };
    (0..n).map(|i| (clean.pixels[i] + clean.lung[i] * delta[i]).clamp(-1.0, 1.0)).collect()
}

const ASSIGNMENT_STREAM: u64 = u64::MAX;

/// Renders every slice of every split. Slice ids run over train, val, test,
/// class 0 before class 1. Each slice draws from its own stream, so a slice
/// does not depend on any other.
pub fn synth_dataset(spec: &SynthSpec, seed: u64) -> Result<Vec<SliceRecord>> {
    spec.validate()?;
    let mut assign = slice_rng(seed, ASSIGNMENT_STREAM);
    let mut plan = Vec::with_capacity(spec.total());
    for split in Split::ALL {
        let counts = spec.counts(split);
        for (class, n) in [(0usize, counts.class0), (1, counts.class1)] {
            let confounded = if class == 0 { Bias::A } else { Bias::B };
            let mut biases = match (spec.bias_mode, split) {
                (BiasMode::Random, _) => (0..n).map(|_| if assign.random_bool(0.5) { Bias::A } else { Bias::B }).collect(),
                (BiasMode::Confounded, Split::Train | Split::Val) => vec![confounded; n],
                (BiasMode::Confounded, Split::Test) => {
                    let flipped = (spec.test_majority_fraction * n as f64).round() as usize;
                    let mut v: Vec<Bias> = (0..n).map(|k| if k < flipped { confounded.other() } else { confounded }).collect();
                    v.shuffle(&mut assign);
                    v
                }
            };
            plan.extend(biases.drain(..).map(|b| (split, class, b)));
        }
    }
    plan.into_iter()
        .enumerate()
        .map(|(id, (split, class, bias))| {
            let mut r = render_slice(spec.image_size, class, bias, seed, id as u64)?;
            r.split = split;
            Ok(r)
        })
        .collect()
}

/// One slice of the given class and texture, exactly as `synth_dataset`
/// would render it at position `slice_id`. The split is left as train.
pub fn render_slice(size: usize, class: usize, bias: Bias, seed: u64, slice_id: u64) -> Result<SliceRecord> {
    if class > 1 || size < 16 {
        return invalid(format!("render_slice: class {class}, size {size}"));
    }
    let mut rng = slice_rng(seed, slice_id);
    let clean = render_clean(size, class, &mut rng);
    let pixels = apply_texture(&clean, bias, &mut rng);
    Ok(SliceRecord {
        slice_id,
        image: Tensor::new(pixels, &[1, size, size])?,
        class_label: class,
        bias_label: bias,
        split: Split::Train,
        provenance: Provenance::RealSynthetic,
        lesion_mask: Some(Tensor::new(clean.mask, &[1, size, size])?),
    })
}
