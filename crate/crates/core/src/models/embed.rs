use rand::Rng;

use super::{conv, dense, push_conv, push_dense, ArchitectureSpec, NetworkParams};
use crate::error::{shape_err, Result};
use crate::nn::LEAKY_SLOPE;
use crate::tensor::Tensor;

/// Added to the row norm before dividing.
const NORM_EPS: f64 = 1e-12;

pub fn init_embedder(arch: &ArchitectureSpec, rng: &mut impl Rng) -> Result<NetworkParams> {
    let mut p = NetworkParams::new("embedder", arch.tag("embedder"));
    let mut ci = 1;
    for (l, &co) in arch.embed_channels.iter().enumerate() {
        push_conv(&mut p, rng, &format!("conv{l}"), ci, co, 3)?;
        ci = co;
    }
    push_dense(&mut p, rng, "proj", ci, arch.embed_dim)?;
    Ok(p)
}

/// Row-wise `v / (|v| + 1e-12)`.
pub fn l2_normalize_rows(v: &Tensor) -> Result<Tensor> {
    let norm = v.square().sum_axis(1, true)?.sqrt().add_scalar(NORM_EPS);
    v.div(&norm)
}

/// Unit-norm embeddings `[N, embed_dim]`: stride-2 conv stack, global
/// average pooling, dense projection, L2 normalization.
pub fn embed(q: &NetworkParams, arch: &ArchitectureSpec, image: &Tensor) -> Result<Tensor> {
    match image.shape() {
        &[_, 1, h, w] if h == arch.image_size && w == arch.image_size => {}
        s => return shape_err(format!("embedder expects [N,1,{0},{0}], got {s:?}", arch.image_size)),
    }
    let mut h = image.clone();
    for l in 0..arch.embed_channels.len() {
        h = conv(q, &format!("conv{l}"), &h, 2)?.leaky_relu(LEAKY_SLOPE);
    }
    l2_normalize_rows(&dense(q, "proj", &h.global_avg_pool()?)?)
}
