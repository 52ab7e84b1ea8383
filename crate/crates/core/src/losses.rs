//! Training objectives: content/style statistics losses, both adversarial
//! sides, the R1 gradient penalty, InfoNCE and cross-entropy.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Error, Result};
use crate::models::{discriminate, ArchitectureSpec, NetworkParams};
use crate::tensor::ops::instance_stats_keepdim;
use crate::tensor::{grad, Tensor};

/// Adversarial objective family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanMode {
    /// Generator maximizes the raw score; the discriminator minimizes
    /// `mean(fake) - mean(real)`.
    PaperScore,
    /// Non-saturating logistic losses.
    Logistic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub lambda_style: f64,
    pub r1_gamma: f64,
    pub gan_mode: GanMode,
    /// Coefficient of the adversarial term. Zero drops the discriminator.
    pub gan_weight: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda_style: 10.0, r1_gamma: 1.0, gan_mode: GanMode::Logistic, gan_weight: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_style >= 0.0) || !(self.r1_gamma >= 0.0) || !(self.gan_weight >= 0.0) {
            return invalid(format!(
                "loss weights must be non-negative, got lambda_style={} r1_gamma={} gan_weight={}",
                self.lambda_style, self.r1_gamma, self.gan_weight
            ));
        }
        Ok(())
    }
}

fn mse(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return shape_err(format!("mse operands differ: {:?} vs {:?}", a.shape(), b.shape()));
    }
    Ok(a.sub(b)?.square().mean())
}

/// Mean squared error between feature maps of the output and of the
/// structure image.
pub fn content_loss(feat_out: &Tensor, feat_structure: &Tensor) -> Result<Tensor> {
    mse(feat_out, feat_structure)
}

/// Sum over layers of the MSE between per-channel instance means plus the
/// MSE between per-channel instance standard deviations.
pub fn style_loss(feats_out: &[Tensor], feats_texture: &[Tensor]) -> Result<Tensor> {
    if feats_out.len() != feats_texture.len() {
        return Err(Error::InvalidArgument(format!(
            "style loss got {} output layers but {} texture layers",
            feats_out.len(),
            feats_texture.len()
        )));
    }
    let mut total = Tensor::scalar(0.0);
    for (o, t) in feats_out.iter().zip(feats_texture) {
        if o.shape() != t.shape() {
            return shape_err(format!("style layer shapes differ: {:?} vs {:?}", o.shape(), t.shape()));
        }
        let (mo, so) = instance_stats_keepdim(o)?;
        let (mt, st) = instance_stats_keepdim(t)?;
        total = total.add(&mse(&mo, &mt)?)?.add(&mse(&so, &st)?)?;
    }
    Ok(total)
}

pub fn gan_g_loss(fake_scores: &Tensor, mode: GanMode) -> Tensor {
    match mode {
        GanMode::PaperScore => fake_scores.mean().neg(),
        GanMode::Logistic => fake_scores.neg().softplus().mean(),
    }
}

pub fn gan_d_loss(real_scores: &Tensor, fake_scores: &Tensor, mode: GanMode) -> Result<Tensor> {
    match mode {
        GanMode::PaperScore => fake_scores.mean().sub(&real_scores.mean()),
        GanMode::Logistic => fake_scores.softplus().mean().add(&real_scores.neg().softplus().mean()),
    }
}

/// `(gamma/2) * mean_n |grad_x score(x_n)|^2` for any per-sample scoring
/// function. The result stays differentiable w.r.t. the scorer's parameters.
pub fn r1_penalty_with(score: impl Fn(&Tensor) -> Result<Tensor>, real_images: &Tensor, gamma: f64) -> Result<Tensor> {
    if !(gamma >= 0.0) {
        return invalid(format!("r1 gamma must be non-negative, got {gamma}"));
    }
    let n = *real_images
        .shape()
        .first()
        .ok_or_else(|| Error::Shape("r1 penalty needs a batch dimension".into()))?;
    let x = Tensor::leaf(real_images.to_vec(), real_images.shape(), true)?;
    let scores = score(&x)?;
    let g = grad(&scores.sum(), &[&x], true)?.remove(0);
    Ok(g.square().sum().mul_scalar(0.5 * gamma / n as f64))
}

pub fn r1_penalty(d: &NetworkParams, arch: &ArchitectureSpec, real_images: &Tensor, gamma: f64) -> Result<Tensor> {
    r1_penalty_with(|x| discriminate(d, arch, x), real_images, gamma)
}

/// `content + lambda_style * style + gan_weight * gan`.
pub fn total_generator_loss(content: &Tensor, style: &Tensor, gan: &Tensor, w: &LossWeights) -> Result<Tensor> {
    content.add(&style.mul_scalar(w.lambda_style))?.add(&gan.mul_scalar(w.gan_weight))
}

/// Allowed deviation of an input norm from 1.
const UNIT_NORM_TOL: f64 = 1e-6;

fn check_unit_rows(t: &Tensor, what: &str) -> Result<()> {
    let d = t.data();
    let de = *t.shape().last().unwrap_or(&0);
    for (i, row) in d.chunks(de.max(1)).enumerate() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return invalid(format!("{what} row {i} has norm {norm}, expected 1"));
        }
    }
    Ok(())
}

/// Batched InfoNCE: queries `[B,de]`, positive keys `[B,de]`, negatives
/// `queue [K,de]`; mean over the batch of
/// `-log(exp(q.k+/t) / (exp(q.k+/t) + sum_j exp(q.n_j/t)))`.
pub fn info_nce_batch(query: &Tensor, positive_key: &Tensor, queue: &Tensor, temperature: f64) -> Result<Tensor> {
    let (&[b, de], &[k, qde]) = (query.shape(), queue.shape()) else {
        return shape_err(format!("info_nce expects [B,de] and [K,de], got {:?} and {:?}", query.shape(), queue.shape()));
    };
    if positive_key.shape() != [b, de] || qde != de {
        return shape_err(format!(
            "info_nce shapes disagree: query {:?}, key {:?}, queue {:?}",
            query.shape(),
            positive_key.shape(),
            queue.shape()
        ));
    }
    if k == 0 {
        return invalid("info_nce needs a non-empty negative queue");
    }
    if !(temperature > 0.0) {
        return invalid(format!("temperature must be positive, got {temperature}"));
    }
    check_unit_rows(query, "query")?;
    check_unit_rows(positive_key, "positive key")?;
    check_unit_rows(queue, "queue")?;
    let pos = query.mul(positive_key)?.sum_axis(1, true)?;
    let neg = query.matmul(&queue.t()?)?;
    let logits = Tensor::cat(&[pos, neg], 1)?.mul_scalar(1.0 / temperature);
    Ok(logits.log_softmax(1)?.narrow(1, 0, 1)?.mean().neg())
}

/// Single-query InfoNCE over vectors of length `de`.
pub fn info_nce(query: &Tensor, positive_key: &Tensor, queue: &Tensor, temperature: f64) -> Result<Tensor> {
    let de = query.numel();
    info_nce_batch(&query.reshape(&[1, de])?, &positive_key.reshape(&[1, positive_key.numel()])?, queue, temperature)
}

/// Mean negative log-softmax probability of the true class.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<Tensor> {
    let &[n, c] = logits.shape() else {
        return shape_err(format!("cross_entropy expects [N,C] logits, got {:?}", logits.shape()));
    };
    if labels.len() != n {
        return shape_err(format!("{} labels for {n} rows", labels.len()));
    }
    if let Some(bad) = labels.iter().find(|&&l| l >= c) {
        return invalid(format!("label {bad} outside 0..{c}"));
    }
    let mut onehot = vec![0.0; n * c];
    for (i, &l) in labels.iter().enumerate() {
        onehot[i * c + l] = 1.0;
    }
    let onehot = Tensor::new(onehot, &[n, c])?;
    Ok(logits.log_softmax(1)?.mul(&onehot)?.sum().mul_scalar(-1.0 / n as f64))
}
