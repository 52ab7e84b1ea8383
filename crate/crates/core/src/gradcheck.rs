//! Central finite-difference gradient checking and the suite that covers
//! every differentiable operation, block, loss and network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::losses::{
    content_loss, cross_entropy, gan_d_loss, gan_g_loss, info_nce_batch, r1_penalty, style_loss, total_generator_loss, GanMode,
    LossWeights,
};
use crate::models::{
    classify, decode_plain, discriminate, embed, encode, extract_features, feature_logits, generate, init_classifier,
    init_discriminator, init_embedder, init_encoder, init_feature_extractor, init_generator, init_plain_decoder, l2_normalize_rows,
    ArchitectureSpec, NetworkParams,
};
use crate::nn::{adasin, modulated_conv2d, StructureFeature, TextureVector};
use crate::tensor::{grad, instance_stats, Tensor};

pub const FD_STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Denominator floor of the relative error, so entries whose true gradient is
/// ~0 are judged by absolute error instead of amplified cancellation noise.
pub const REL_ERR_FLOOR: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Second differences above `KINK_SLOPE_JUMP * FD_STEP` mean the stencil
/// straddles a point where the first derivative jumps (a rectifier kink).
/// A smooth function would need a curvature of `KINK_SLOPE_JUMP / FD_STEP`.
pub const KINK_SLOPE_JUMP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GradientCheck {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Mismatching elements whose stencil straddles a kink, where the
    /// derivative is undefined; excluded from `max_rel_err`.
    pub kinks: usize,
}

/// Compares the autograd gradient of the scalar `f` with central
/// differences over every element of every input.
pub fn check_gradients(f: &dyn Fn(&[Tensor]) -> Result<Tensor>, inputs: &[Tensor]) -> Result<GradientCheck> {
    if inputs.iter().any(|t| !t.requires_grad()) {
        return invalid("gradient check inputs must require grad");
    }
    let loss = f(inputs)?;
    if loss.numel() != 1 {
        return invalid(format!("gradient check needs a scalar, got {:?}", loss.shape()));
    }
    let center = loss.item();
    let refs: Vec<&Tensor> = inputs.iter().collect();
    let analytic = grad(&loss, &refs, false)?;
    let mut out = GradientCheck::default();
    for (x, g) in inputs.iter().zip(&analytic) {
        let g = g.to_vec();
        for j in 0..x.numel() {
            let v = x.data()[j];
            x.data_mut()[j] = v + FD_STEP;
            let plus = f(inputs)?.item();
            x.data_mut()[j] = v - FD_STEP;
            let minus = f(inputs)?.item();
            x.data_mut()[j] = v;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let err = relative_error(g[j], numeric);
            if err >= TOLERANCE && (plus - 2.0 * center + minus).abs() > KINK_SLOPE_JUMP * FD_STEP {
                out.kinks += 1;
                continue;
            }
            out.checked += 1;
            out.max_rel_err = out.max_rel_err.max(err);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub instances: usize,
    pub max_rel_err: f64,
    pub checked: usize,
    pub kinks: usize,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < TOLERANCE
    }
}

type Loss = Box<dyn Fn(&[Tensor]) -> Result<Tensor>>;
type Case = fn(&mut ChaCha8Rng) -> Result<(Vec<Tensor>, Loss)>;

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::parameter((0..n).map(|_| rng.random_range(lo..hi)).collect(), shape).expect("consistent shape")
}

fn normal_ish(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    uniform(rng, shape, -1.0, 1.0)
}

/// Values bounded away from zero so a kink is never straddled.
fn off_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    let d = (0..n)
        .map(|_| {
            let m = rng.random_range(0.05..1.0);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::parameter(d, shape).expect("consistent shape")
}

/// Reduces any output to a scalar with fixed random weights, so the whole
/// Jacobian is exercised.
fn project(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), shape).expect("consistent shape")
}

macro_rules! projected {
    ($rng:expr, $out_shape:expr, |$x:ident| $body:expr) => {{
        let w = project($rng, &$out_shape);
        let f: Loss = Box::new(move |$x: &[Tensor]| -> Result<Tensor> { Ok($body?.mul(&w)?.sum()) });
        f
    }};
}

fn positive(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    uniform(rng, shape, 0.2, 2.0)
}

fn wide(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    uniform(rng, shape, -4.0, 4.0)
}

fn unary(
    rng: &mut ChaCha8Rng,
    sample: fn(&mut ChaCha8Rng, &[usize]) -> Tensor,
    op: fn(&Tensor) -> Tensor,
) -> Result<(Vec<Tensor>, Loss)> {
    let shape = small_dims(rng);
    let x = sample(rng, &shape);
    let f = projected!(rng, shape, |x| Ok::<_, crate::Error>(op(&x[0])));
    Ok((vec![x], f))
}

fn small_dims(rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..rng.random_range(1..=3)).map(|_| rng.random_range(1..=4)).collect()
}

fn tiny_arch() -> ArchitectureSpec {
    ArchitectureSpec {
        image_size: 8,
        base_channels: 2,
        structure_channels: 2,
        texture_dim: 2,
        generator_channels: vec![2, 2, 2],
        discriminator_channels: vec![2, 2, 2],
        classifier_channels: vec![2, 2, 2],
        feature_channels: vec![2, 2, 2, 2],
        content_layer: 3,
        style_layers: vec![1, 2, 3, 4],
        embed_channels: vec![2, 2],
        embed_dim: 3,
    }
}

fn tiny_image(rng: &mut ChaCha8Rng, n: usize) -> Tensor {
    uniform(rng, &[n, 1, 8, 8], -1.0, 1.0)
}

/// Zero-initialized biases leave exact zeros at rectifier inputs (dead
/// units feeding dead units), where central differences straddle the kink;
/// random biases avoid that.
fn jitter_biases(rng: &mut ChaCha8Rng, p: &NetworkParams) {
    for (name, t) in p.entries() {
        if name.ends_with(".bias") {
            t.data_mut().iter_mut().for_each(|v| *v += rng.random_range(-0.5..0.5));
        }
    }
}

fn with_params(rng: &mut ChaCha8Rng, mut first: Vec<Tensor>, p: &NetworkParams) -> Vec<Tensor> {
    jitter_biases(rng, p);
    first.extend(p.tensors());
    first
}

const CASES: &[(&str, Case)] = &[
    ("add", |r| {
        let (a, b) = (normal_ish(r, &[2, 3]), normal_ish(r, &[3]));
        Ok((vec![a, b], projected!(r, [2, 3], |x| x[0].add(&x[1]))))
    }),
    ("sub", |r| {
        let (a, b) = (normal_ish(r, &[2, 3]), normal_ish(r, &[2, 1]));
        Ok((vec![a, b], projected!(r, [2, 3], |x| x[0].sub(&x[1]))))
    }),
    ("mul", |r| {
        let (a, b) = (normal_ish(r, &[2, 3, 2]), normal_ish(r, &[3, 1]));
        Ok((vec![a, b], projected!(r, [2, 3, 2], |x| x[0].mul(&x[1]))))
    }),
    ("div", |r| {
        let (a, b) = (normal_ish(r, &[2, 3]), uniform(r, &[1, 3], 0.5, 2.0));
        Ok((vec![a, b], projected!(r, [2, 3], |x| x[0].div(&x[1]))))
    }),
    ("add_mul_scalar", |r| {
        let s = small_dims(r);
        let c = r.random_range(-2.0..2.0);
        let x = normal_ish(r, &s);
        Ok((vec![x], projected!(r, s, |x| Ok::<_, crate::Error>(x[0].mul_scalar(c).add_scalar(c).neg()))))
    }),
    ("exp", |r| unary(r, normal_ish, Tensor::exp)),
    ("ln", |r| unary(r, positive, Tensor::ln)),
    ("sqrt", |r| unary(r, positive, Tensor::sqrt)),
    ("powf", |r| {
        let s = small_dims(r);
        let x = uniform(r, &s, 0.2, 2.0);
        let p = r.random_range(-2.0..3.0);
        Ok((vec![x], projected!(r, s, |x| Ok::<_, crate::Error>(x[0].powf(p)))))
    }),
    ("square", |r| unary(r, normal_ish, Tensor::square)),
    ("tanh", |r| unary(r, normal_ish, Tensor::tanh)),
    ("sigmoid", |r| unary(r, wide, Tensor::sigmoid)),
    ("softplus", |r| unary(r, wide, Tensor::softplus)),
    ("leaky_relu", |r| {
        let s = small_dims(r);
        let x = off_zero(r, &s);
        Ok((vec![x], projected!(r, s, |x| Ok::<_, crate::Error>(x[0].leaky_relu(0.2)))))
    }),
    ("relu", |r| unary(r, off_zero, Tensor::relu)),
    ("sum_mean", |r| {
        let s = small_dims(r);
        let x = normal_ish(r, &s);
        let (a, b) = (r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let f: Loss = Box::new(move |x| x[0].sum().mul_scalar(a).add(&x[0].square().mean().mul_scalar(b)));
        Ok((vec![x], f))
    }),
    ("sum_axis", |r| {
        let x = normal_ish(r, &[2, 3, 4]);
        let axis = r.random_range(0..3);
        let mut out = vec![2, 3, 4];
        out[axis] = 1;
        Ok((vec![x], projected!(r, out, |x| x[0].sum_axis(axis, true))))
    }),
    ("mean_axis", |r| {
        let x = normal_ish(r, &[2, 3, 4]);
        let axis = r.random_range(0..3);
        let mut out = vec![2, 3, 4];
        out.remove(axis);
        Ok((vec![x], projected!(r, out, |x| x[0].mean_axis(axis, false))))
    }),
    ("log_softmax", |r| {
        let x = uniform(r, &[3, 4], -3.0, 3.0);
        let axis = r.random_range(0..2);
        Ok((vec![x], projected!(r, [3, 4], |x| x[0].log_softmax(axis))))
    }),
    ("reshape", |r| {
        let x = normal_ish(r, &[2, 6]);
        Ok((vec![x], projected!(r, [3, 2, 2], |x| x[0].reshape(&[3, 2, 2]))))
    }),
    ("expand", |r| {
        let x = normal_ish(r, &[2, 1, 3]);
        Ok((vec![x], projected!(r, [4, 2, 5, 3], |x| x[0].expand(&[4, 2, 5, 3]))))
    }),
    ("sum_to", |r| {
        let x = normal_ish(r, &[2, 3, 4]);
        Ok((vec![x], projected!(r, [3, 1], |x| x[0].sum_to(&[3, 1]))))
    }),
    ("transpose", |r| {
        let x = normal_ish(r, &[2, 5]);
        Ok((vec![x], projected!(r, [5, 2], |x| x[0].t())))
    }),
    ("matmul", |r| {
        let (m, k, n) = (r.random_range(1..4), r.random_range(1..5), r.random_range(1..4));
        let (a, b) = (normal_ish(r, &[m, k]), normal_ish(r, &[k, n]));
        Ok((vec![a, b], projected!(r, [m, n], |x| x[0].matmul(&x[1]))))
    }),
    ("narrow", |r| {
        let x = normal_ish(r, &[3, 5, 2]);
        let start = r.random_range(0..4);
        let len = r.random_range(1..=5 - start);
        Ok((vec![x], projected!(r, [3, len, 2], |x| x[0].narrow(1, start, len))))
    }),
    ("pad_axis", |r| {
        let x = normal_ish(r, &[2, 3]);
        let start = r.random_range(0..3);
        Ok((vec![x], projected!(r, [2, 6], |x| x[0].pad_axis(1, start, 6))))
    }),
    ("cat", |r| {
        let (a, b) = (normal_ish(r, &[2, 2, 3]), normal_ish(r, &[2, 1, 3]));
        Ok((vec![a, b], projected!(r, [2, 3, 3], |x| Tensor::cat(&[x[0].clone(), x[1].clone()], 1))))
    }),
    ("nearest_up2", |r| {
        let x = normal_ish(r, &[2, 2, 2, 3]);
        Ok((vec![x], projected!(r, [2, 2, 4, 6], |x| x[0].nearest_up2())))
    }),
    ("avg_down2", |r| {
        let x = normal_ish(r, &[2, 2, 4, 6]);
        Ok((vec![x], projected!(r, [2, 2, 2, 3], |x| x[0].avg_down2())))
    }),
    ("global_avg_pool", |r| {
        let x = normal_ish(r, &[2, 3, 3, 2]);
        Ok((vec![x], projected!(r, [2, 3], |x| x[0].global_avg_pool())))
    }),
    ("conv2d", |r| {
        let k = [1, 2, 3][r.random_range(0..3)];
        let stride = r.random_range(1..=2);
        let padding = r.random_range(0..=k / 2 + 1);
        let (n, ci, co, h, w) = (r.random_range(1..3), r.random_range(1..4), r.random_range(1..4), 5, 4);
        let x = normal_ish(r, &[n, ci, h, w]);
        let wt = normal_ish(r, &[co, ci, k, k]);
        let b = normal_ish(r, &[co]);
        let oh = (h + 2 * padding - k) / stride + 1;
        let ow = (w + 2 * padding - k) / stride + 1;
        let f = projected!(r, [n, co, oh, ow], |x| x[0].conv2d(&x[1], Some(&x[2]), stride, padding));
        Ok((vec![x, wt, b], f))
    }),
    ("instance_stats", |r| {
        let x = normal_ish(r, &[2, 3, 3, 3]);
        let (wm, ws) = (project(r, &[2, 3]), project(r, &[2, 3]));
        let f: Loss = Box::new(move |x| {
            let (m, s) = instance_stats(&x[0])?;
            m.mul(&wm)?.sum().add(&s.mul(&ws)?.sum())
        });
        Ok((vec![x], f))
    }),
    ("adasin", |r| {
        let (a, b) = (normal_ish(r, &[2, 2, 3, 3]), normal_ish(r, &[2, 2, 3, 3]));
        let f = projected!(r, [2, 2, 3, 3], |x| {
            adasin(&StructureFeature::new(x[0].clone())?, &StructureFeature::new(x[1].clone())?).map(|o| o.into_tensor())
        });
        Ok((vec![a, b], f))
    }),
    ("modulated_conv2d", |r| {
        let demod = r.random_bool(0.5);
        let k = [1, 3][r.random_range(0..2)];
        let x = normal_ish(r, &[2, 3, 4, 4]);
        let w = normal_ish(r, &[2, 3, k, k]);
        let s = uniform(r, &[2, 3], -1.5, 1.5);
        let f = projected!(r, [2, 2, 4, 4], |x| modulated_conv2d(&x[0], &x[1], &x[2], demod));
        Ok((vec![x, w, s], f))
    }),
    ("content_loss", |r| {
        let (a, b) = (normal_ish(r, &[2, 2, 3, 3]), normal_ish(r, &[2, 2, 3, 3]));
        let f: Loss = Box::new(|x| content_loss(&x[0], &x[1]));
        Ok((vec![a, b], f))
    }),
    ("style_loss", |r| {
        let a = vec![normal_ish(r, &[2, 2, 4, 4]), normal_ish(r, &[2, 3, 2, 2])];
        let b = vec![normal_ish(r, &[2, 2, 4, 4]), normal_ish(r, &[2, 3, 2, 2])];
        let f: Loss = Box::new(|x| style_loss(&x[..2], &x[2..]));
        Ok((a.into_iter().chain(b).collect(), f))
    }),
    ("gan_g_loss", |r| {
        let mode = if r.random_bool(0.5) { GanMode::Logistic } else { GanMode::PaperScore };
        let s = uniform(r, &[4], -3.0, 3.0);
        let f: Loss = Box::new(move |x| Ok(gan_g_loss(&x[0], mode)));
        Ok((vec![s], f))
    }),
    ("gan_d_loss", |r| {
        let mode = if r.random_bool(0.5) { GanMode::Logistic } else { GanMode::PaperScore };
        let (a, b) = (uniform(r, &[3], -3.0, 3.0), uniform(r, &[3], -3.0, 3.0));
        let f: Loss = Box::new(move |x| gan_d_loss(&x[0], &x[1], mode));
        Ok((vec![a, b], f))
    }),
    ("total_generator_loss", |r| {
        let parts: Vec<Tensor> = (0..3).map(|_| uniform(r, &[1], -2.0, 2.0)).collect();
        let w = LossWeights { lambda_style: r.random_range(0.0..20.0), ..Default::default() };
        let f: Loss = Box::new(move |x| total_generator_loss(&x[0].sum(), &x[1].sum(), &x[2].sum(), &w));
        Ok((parts, f))
    }),
    ("info_nce", |r| {
        let (q, k, queue) = (normal_ish(r, &[2, 4]), normal_ish(r, &[2, 4]), normal_ish(r, &[5, 4]));
        let tau = r.random_range(0.1..1.0);
        let f: Loss = Box::new(move |x| {
            info_nce_batch(&l2_normalize_rows(&x[0])?, &l2_normalize_rows(&x[1])?, &l2_normalize_rows(&x[2])?, tau)
        });
        Ok((vec![q, k, queue], f))
    }),
    ("cross_entropy", |r| {
        let logits = uniform(r, &[4, 2], -3.0, 3.0);
        let labels: Vec<usize> = (0..4).map(|_| r.random_range(0..2)).collect();
        let f: Loss = Box::new(move |x| cross_entropy(&x[0], &labels));
        Ok((vec![logits], f))
    }),
    ("r1_penalty", |r| {
        // second order: the penalty is itself a gradient, differentiated
        // here w.r.t. the discriminator parameters
        let arch = tiny_arch();
        let d = init_discriminator(&arch, r)?;
        let img = tiny_image(r, 2).detach();
        let gamma = r.random_range(0.5..2.0);
        jitter_biases(r, &d);
        let inputs = d.tensors();
        let f: Loss = Box::new(move |_| r1_penalty(&d, &arch, &img, gamma));
        Ok((inputs, f))
    }),
    ("encode", |r| {
        let arch = tiny_arch();
        let e = init_encoder(&arch, r)?;
        let img = tiny_image(r, 2);
        let (ws, wt) = (project(r, &[2, 2, 2, 2]), project(r, &[2, 2]));
        let inputs = with_params(r, vec![img], &e);
        let f: Loss = Box::new(move |x| {
            let (s, t) = encode(&e, &arch, &x[0])?;
            s.tensor().mul(&ws)?.sum().add(&t.tensor().mul(&wt)?.sum())
        });
        Ok((inputs, f))
    }),
    ("generate", |r| {
        let arch = tiny_arch();
        let g = init_generator(&arch, r)?;
        let (s, t) = (normal_ish(r, &[2, 2, 2, 2]), normal_ish(r, &[2, 2]));
        let inputs = with_params(r, vec![s, t], &g);
        let f = projected!(r, [2, 1, 8, 8], |x| {
            generate(&g, &arch, &StructureFeature::new(x[0].clone())?, &TextureVector::new(x[1].clone())?)
        });
        Ok((inputs, f))
    }),
    ("decode_plain", |r| {
        let arch = tiny_arch();
        let d = init_plain_decoder(&arch, r)?;
        let s = normal_ish(r, &[2, 2, 2, 2]);
        let inputs = with_params(r, vec![s], &d);
        let f = projected!(r, [2, 1, 8, 8], |x| decode_plain(&d, &arch, &StructureFeature::new(x[0].clone())?));
        Ok((inputs, f))
    }),
    ("discriminate", |r| {
        let arch = tiny_arch();
        let d = init_discriminator(&arch, r)?;
        let img = tiny_image(r, 2);
        let inputs = with_params(r, vec![img], &d);
        let f = projected!(r, [2], |x| discriminate(&d, &arch, &x[0]));
        Ok((inputs, f))
    }),
    ("extract_features", |r| {
        let arch = tiny_arch();
        let fx = init_feature_extractor(&arch, r)?;
        let img = tiny_image(r, 2);
        let inputs = with_params(r, vec![img], &fx);
        let ws: Vec<Tensor> = [8, 4, 2, 1].iter().map(|&h| project(r, &[2, 2, h, h])).collect();
        let f: Loss = Box::new(move |x| {
            let feats = extract_features(&fx, &arch, &x[0], &[1, 2, 3, 4])?;
            let mut total = Tensor::scalar(0.0);
            for (m, w) in feats.iter().zip(&ws) {
                total = total.add(&m.mul(w)?.sum())?;
            }
            total.add(&feature_logits(&fx, &arch, &x[0])?.sum())
        });
        Ok((inputs, f))
    }),
    ("classify", |r| {
        let arch = tiny_arch();
        let c = init_classifier(&arch, r)?;
        let img = tiny_image(r, 2);
        let inputs = with_params(r, vec![img], &c);
        let labels = vec![r.random_range(0..2), r.random_range(0..2)];
        let f: Loss = Box::new(move |x| cross_entropy(&classify(&c, &arch, &x[0])?, &labels));
        Ok((inputs, f))
    }),
    ("embed", |r| {
        let arch = tiny_arch();
        let q = init_embedder(&arch, r)?;
        let img = tiny_image(r, 2);
        let inputs = with_params(r, vec![img], &q);
        let f = projected!(r, [2, 3], |x| embed(&q, &arch, &x[0]));
        Ok((inputs, f))
    }),
];

pub fn case_names() -> Vec<&'static str> {
    CASES.iter().map(|(n, _)| *n).collect()
}

/// Runs every case on `instances` random instances drawn from `seed`.
pub fn run_suite(instances: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(CASES.len());
    for (name, case) in CASES {
        let mut report = CheckReport { name, instances, max_rel_err: 0.0, checked: 0, kinks: 0 };
        for _ in 0..instances {
            let (inputs, f) = case(&mut rng)?;
            let c = check_gradients(&*f, &inputs)?;
            report.max_rel_err = report.max_rel_err.max(c.max_rel_err);
            report.checked += c.checked;
            report.kinks += c.kinks;
        }
        out.push(report);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_a_wrong_gradient() {
        let x = Tensor::parameter(vec![0.3, -0.7], &[2]).unwrap();
        // correct
        let ok = check_gradients(&|x: &[Tensor]| Ok(x[0].square().sum()), &[x.clone()]).unwrap();
        assert!(ok.max_rel_err < 1e-8);
        assert_eq!((ok.checked, ok.kinks), (2, 0));
        // value of x^2 with a detached factor: autograd sees d/dx = x, not 2x
        let bad = check_gradients(&|x: &[Tensor]| x[0].mul(&x[0].detach()).map(|t| t.sum()), &[x]).unwrap();
        assert!(bad.max_rel_err > 0.4);
        assert_eq!(bad.kinks, 0);
    }

    #[test]
    fn kink_is_excluded_not_hidden() {
        // |x| at x = 2e-6: the stencil crosses zero
        let x = Tensor::parameter(vec![2e-6, 0.5], &[2]).unwrap();
        let c = check_gradients(&|x: &[Tensor]| Ok(x[0].relu().add(&x[0].neg().relu())?.sum()), &[x]).unwrap();
        assert_eq!((c.checked, c.kinks), (1, 1));
        assert!(c.max_rel_err < 1e-8);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((relative_error(0.0, 1e-9) - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn suite_passes_a_few_instances() {
        for r in run_suite(2, 7).unwrap() {
            assert!(r.passed(), "{} max rel err {}", r.name, r.max_rel_err);
        }
    }
}
