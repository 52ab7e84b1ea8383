//! Structure re-normalization (AdaSIN) and texture-modulated convolution,
//! the two blocks the generator is built around.

use crate::error::{shape_err, Error, Result};
use crate::tensor::ops::instance_stats_keepdim_eps;
use crate::tensor::Tensor;

/// Default negative slope for leaky ReLU throughout the networks.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Added to the variance inside AdaSIN. Small enough that the output carries
/// the target's statistics to 1e-5 even when the source std is only 1e-3.
pub const ADASIN_EPS: f64 = 1e-12;

/// Added to the squared filter norm before demodulating.
pub const DEMOD_EPS: f64 = 1e-8;

/// Spatial feature map `[N, Cs, Hs, Ws]` from an early encoder stage.
#[derive(Clone, Debug)]
pub struct StructureFeature(Tensor);

impl StructureFeature {
    pub fn new(t: Tensor) -> Result<Self> {
        match t.shape() {
            &[_, _, h, w] if h >= 2 && w >= 2 => Ok(Self(t)),
            s => shape_err(format!("structure feature must be [N,C,H>=2,W>=2], got {s:?}")),
        }
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }
}

/// Global texture embedding `[N, dt]`.
#[derive(Clone, Debug)]
pub struct TextureVector(Tensor);

impl TextureVector {
    pub fn new(t: Tensor) -> Result<Self> {
        if t.ndim() != 2 {
            return shape_err(format!("texture vector must be [N,dt], got {:?}", t.shape()));
        }
        if !t.all_finite() {
            return Err(Error::InvalidArgument("texture vector has non-finite entries".into()));
        }
        Ok(Self(t))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }
}

/// Re-normalizes `s1` to carry the per-sample, per-channel spatial mean and
/// standard deviation of `s2`:
///
/// `sigma(s2) * (s1 - mu(s1)) / sigma(s1) + mu(s2)`
pub fn adasin(s1: &StructureFeature, s2: &StructureFeature) -> Result<StructureFeature> {
    let (a, b) = (s1.tensor(), s2.tensor());
    if a.shape() != b.shape() {
        return shape_err(format!("adasin inputs differ: {:?} vs {:?}", a.shape(), b.shape()));
    }
    let (mu1, sd1) = instance_stats_keepdim_eps(a, ADASIN_EPS)?;
    let (mu2, sd2) = instance_stats_keepdim_eps(b, ADASIN_EPS)?;
    let out = a.sub(&mu1)?.div(&sd1)?.mul(&sd2)?.add(&mu2)?;
    StructureFeature::new(out)
}

/// Convolution whose weights are scaled per sample and input channel by
/// `style_scales` (`[N, Cin]`) and, with `demodulate`, renormalized so every
/// output filter has unit L2 norm. Padding keeps spatial size for odd kernels.
///
/// Scaling input channels before a shared convolution and output channels
/// after it is algebraically identical to convolving with per-sample weights
/// `w[o,i] * s[n,i] * d[n,o]`, and avoids materializing them.
pub fn modulated_conv2d(input: &Tensor, weight: &Tensor, style_scales: &Tensor, demodulate: bool) -> Result<Tensor> {
    let &[n, ci, _, _] = input.shape() else {
        return shape_err(format!("modulated_conv2d input must be [N,C,H,W], got {:?}", input.shape()));
    };
    let &[co, wci, kh, kw] = weight.shape() else {
        return shape_err(format!("modulated_conv2d weight must be 4-D, got {:?}", weight.shape()));
    };
    if wci != ci {
        return shape_err(format!("modulated_conv2d: input has {ci} channels, weight expects {wci}"));
    }
    if style_scales.shape() != [n, ci] {
        return shape_err(format!("style scales must be [{n},{ci}], got {:?}", style_scales.shape()));
    }
    if kh != kw || kh % 2 == 0 {
        return shape_err(format!("modulated_conv2d needs an odd square kernel, got {kh}x{kw}"));
    }
    let scaled = input.mul(&style_scales.reshape(&[n, ci, 1, 1])?)?;
    let out = scaled.conv2d(weight, None, 1, kh / 2)?;
    if !demodulate {
        return Ok(out);
    }
    // sum_{i,k} (s[n,i] w[o,i,k])^2 = sum_i s[n,i]^2 * sum_k w[o,i,k]^2
    let filter_energy = weight.square().reshape(&[co, ci, kh * kw])?.sum_axis(2, false)?;
    let energy = style_scales.square().matmul(&filter_energy.t()?)?;
    let demod = energy.add_scalar(DEMOD_EPS).powf(-0.5);
    out.mul(&demod.reshape(&[n, co, 1, 1])?)
}

/// Nearest 2x upsampling or 2x2 average downsampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResampleMode {
    NearestUp2,
    AvgDown2,
}

pub fn resample(x: &Tensor, mode: ResampleMode) -> Result<Tensor> {
    match mode {
        ResampleMode::NearestUp2 => x.nearest_up2(),
        ResampleMode::AvgDown2 => x.avg_down2(),
    }
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Tensor {
    x.leaky_relu(slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::instance_stats;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn feat(data: &[f64], shape: &[usize]) -> StructureFeature {
        StructureFeature::new(Tensor::new(data.to_vec(), shape).unwrap()).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new((0..n).map(|_| rng.random_range(-2.0..2.0)).collect(), shape).unwrap()
    }

    #[test]
    fn structure_feature_needs_spatial_extent() {
        assert!(StructureFeature::new(Tensor::zeros(&[1, 2, 1, 4])).is_err());
        assert!(StructureFeature::new(Tensor::zeros(&[1, 2, 2, 2])).is_ok());
    }

    #[test]
    fn adasin_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = StructureFeature::new(random(&mut rng, &[2, 3, 4, 4])).unwrap();
        let o = adasin(&s, &s).unwrap();
        for (a, b) in o.tensor().to_vec().iter().zip(s.tensor().to_vec()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn adasin_affine_target() {
        // s2 = 10 * s1 exactly, so the output must equal s2 up to epsilon effects
        let o = adasin(&feat(&[1.0, 2.0, 3.0, 2.0], &[1, 1, 2, 2]), &feat(&[10.0, 20.0, 30.0, 20.0], &[1, 1, 2, 2])).unwrap();
        for (a, b) in o.tensor().to_vec().iter().zip([10.0, 20.0, 30.0, 20.0]) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn adasin_hand_example() {
        let o = adasin(&feat(&[1.0, 2.0, 3.0, 4.0], &[1, 1, 2, 2]), &feat(&[0.0, 0.0, 0.0, 2.0], &[1, 1, 2, 2])).unwrap();
        let want = [-0.6619, 0.1127, 0.8873, 1.6619];
        for (a, b) in o.tensor().to_vec().iter().zip(want) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn adasin_rejects_mismatch() {
        assert!(adasin(&feat(&[0.0; 4], &[1, 1, 2, 2]), &feat(&[0.0; 8], &[1, 2, 2, 2])).is_err());
    }

    #[test]
    fn adasin_matches_target_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = StructureFeature::new(random(&mut rng, &[3, 4, 5, 5])).unwrap();
        let b = StructureFeature::new(random(&mut rng, &[3, 4, 5, 5]).mul_scalar(3.0).add_scalar(1.0)).unwrap();
        let o = adasin(&a, &b).unwrap();
        let (mo, so) = instance_stats(o.tensor()).unwrap();
        let (mb, sb) = instance_stats(b.tensor()).unwrap();
        for (x, y) in mo.to_vec().iter().zip(mb.to_vec()) {
            assert!((x - y).abs() < 1e-5);
        }
        for (x, y) in so.to_vec().iter().zip(sb.to_vec()) {
            assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn modconv_identity_modulation_is_plain_conv() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(&mut rng, &[2, 3, 5, 5]);
        let w = random(&mut rng, &[4, 3, 3, 3]);
        let got = modulated_conv2d(&x, &w, &Tensor::ones(&[2, 3]), false).unwrap();
        let want = x.conv2d(&w, None, 1, 1).unwrap();
        assert_eq!(got.to_vec(), want.to_vec());
    }

    #[test]
    fn modconv_demod_hand_example() {
        let x = Tensor::new(vec![1.0, 1.0], &[1, 2, 1, 1]).unwrap();
        let w = Tensor::new(vec![1.0, 1.0], &[1, 2, 1, 1]).unwrap();
        let s = Tensor::new(vec![2.0, 3.0], &[1, 2]).unwrap();
        let y = modulated_conv2d(&x, &w, &s, true).unwrap().item();
        let want = 5.0 / (13.0f64 + 1e-8).sqrt();
        assert!((y - want).abs() < 1e-12);
        assert!((y - 1.386750).abs() < 1e-6);
    }

    #[test]
    fn modconv_matches_explicit_per_sample_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (n, ci, co) = (2, 3, 2);
        let x = random(&mut rng, &[n, ci, 4, 4]);
        let w = random(&mut rng, &[co, ci, 3, 3]);
        let s = random(&mut rng, &[n, ci]);
        let got = modulated_conv2d(&x, &w, &s, true).unwrap().to_vec();
        let (wd, sd) = (w.to_vec(), s.to_vec());
        for sample in 0..n {
            let mut ws = vec![0.0; co * ci * 9];
            for o in 0..co {
                for i in 0..ci {
                    for k in 0..9 {
                        ws[(o * ci + i) * 9 + k] = wd[(o * ci + i) * 9 + k] * sd[sample * ci + i];
                    }
                }
                let norm: f64 = ws[o * ci * 9..(o + 1) * ci * 9].iter().map(|v| v * v).sum::<f64>() + DEMOD_EPS;
                ws[o * ci * 9..(o + 1) * ci * 9].iter_mut().for_each(|v| *v /= norm.sqrt());
            }
            let xs = x.narrow(0, sample, 1).unwrap();
            let want = xs.conv2d(&Tensor::new(ws, &[co, ci, 3, 3]).unwrap(), None, 1, 1).unwrap().to_vec();
            let got_s = &got[sample * co * 16..(sample + 1) * co * 16];
            for (a, b) in got_s.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn modconv_demod_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random(&mut rng, &[1, 3, 4, 4]);
        let w = random(&mut rng, &[2, 3, 3, 3]);
        let a = modulated_conv2d(&x, &w, &Tensor::full(&[1, 3], 1.0), true).unwrap().to_vec();
        let b = modulated_conv2d(&x, &w, &Tensor::full(&[1, 3], 7.5), true).unwrap().to_vec();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-8);
        }
    }

    #[test]
    fn modconv_rejects_channel_mismatch() {
        let x = Tensor::zeros(&[1, 3, 4, 4]);
        assert!(modulated_conv2d(&x, &Tensor::zeros(&[2, 2, 3, 3]), &Tensor::ones(&[1, 3]), true).is_err());
        assert!(modulated_conv2d(&x, &Tensor::zeros(&[2, 3, 3, 3]), &Tensor::ones(&[1, 2]), true).is_err());
    }
}
