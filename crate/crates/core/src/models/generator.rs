use rand::Rng;

use super::params::{constant_param, he_uniform};
use super::{conv, push_conv, ArchitectureSpec, NetworkParams};
use crate::error::{shape_err, Result};
use crate::nn::{modulated_conv2d, StructureFeature, TextureVector, LEAKY_SLOPE};
use crate::tensor::Tensor;

fn layer_inputs(arch: &ArchitectureSpec) -> Vec<(usize, usize)> {
    let mut cin = arch.structure_channels;
    arch.generator_channels
        .iter()
        .map(|&co| {
            let pair = (cin, co);
            cin = co;
            pair
        })
        .collect()
}

pub fn init_generator(arch: &ArchitectureSpec, rng: &mut impl Rng) -> Result<NetworkParams> {
    let mut p = NetworkParams::new("generator", arch.tag("generator"));
    for (l, (ci, co)) in layer_inputs(arch).into_iter().enumerate() {
        p.push(format!("mod{l}.weight"), he_uniform(rng, &[co, ci, 3, 3], ci * 9))?;
        p.push(format!("mod{l}.bias"), constant_param(&[co], 0.0))?;
        // texture -> per-input-channel scales; bias 1 keeps the initial modulation near identity
        p.push(format!("style{l}.weight"), he_uniform(rng, &[ci, arch.texture_dim], arch.texture_dim))?;
        p.push(format!("style{l}.bias"), constant_param(&[ci], 1.0))?;
    }
    let last = *arch.generator_channels.last().expect("validated");
    push_conv(&mut p, rng, "to_image", last, 1, 1)?;
    Ok(p)
}

fn check_inputs(arch: &ArchitectureSpec, s: &Tensor) -> Result<usize> {
    let hs = arch.structure_size();
    match s.shape() {
        &[n, c, h, w] if c == arch.structure_channels && h == hs && w == hs => Ok(n),
        sh => shape_err(format!("generator expects structure [N,{},{hs},{hs}], got {sh:?}", arch.structure_channels)),
    }
}

/// Decodes a structure feature into an image, delivering the texture vector
/// to every convolution except the final 1x1 projection through weight
/// modulation and demodulation. Output is `[N,1,H,W]` in `(-1, 1)`.
pub fn generate(g: &NetworkParams, arch: &ArchitectureSpec, s: &StructureFeature, t: &TextureVector) -> Result<Tensor> {
    let n = check_inputs(arch, s.tensor())?;
    let t = t.tensor();
    if t.shape() != [n, arch.texture_dim] {
        return shape_err(format!("generator expects texture [{n},{}], got {:?}", arch.texture_dim, t.shape()));
    }
    let mut h = s.tensor().clone();
    for l in 0..arch.generator_channels.len() {
        if l > 0 {
            h = h.nearest_up2()?;
        }
        let style_w = g.get(&format!("style{l}.weight"))?;
        let scales = t.matmul(&style_w.t()?)?.add(g.get(&format!("style{l}.bias"))?)?;
        let co = arch.generator_channels[l];
        h = modulated_conv2d(&h, g.get(&format!("mod{l}.weight"))?, &scales, true)?
            .add(&g.get(&format!("mod{l}.bias"))?.reshape(&[1, co, 1, 1])?)?
            .leaky_relu(LEAKY_SLOPE);
    }
    Ok(conv(g, "to_image", &h, 1)?.tanh())
}

/// Same layout as the generator with ordinary convolutions and no texture
/// input; the decoder of the plain AdaIN variant.
pub fn init_plain_decoder(arch: &ArchitectureSpec, rng: &mut impl Rng) -> Result<NetworkParams> {
    let mut p = NetworkParams::new("decoder", arch.tag("decoder"));
    for (l, (ci, co)) in layer_inputs(arch).into_iter().enumerate() {
        push_conv(&mut p, rng, &format!("conv{l}"), ci, co, 3)?;
    }
    let last = *arch.generator_channels.last().expect("validated");
    push_conv(&mut p, rng, "to_image", last, 1, 1)?;
    Ok(p)
}

pub fn decode_plain(d: &NetworkParams, arch: &ArchitectureSpec, s: &StructureFeature) -> Result<Tensor> {
    check_inputs(arch, s.tensor())?;
    let mut h = s.tensor().clone();
    for l in 0..arch.generator_channels.len() {
        if l > 0 {
            h = h.nearest_up2()?;
        }
        h = conv(d, &format!("conv{l}"), &h, 1)?.leaky_relu(LEAKY_SLOPE);
    }
    Ok(conv(d, "to_image", &h, 1)?.tanh())
}
