use rand::Rng;

use super::{conv, dense, push_conv, push_dense, ArchitectureSpec, NetworkParams};
use crate::error::{shape_err, Result};
use crate::nn::LEAKY_SLOPE;
use crate::tensor::{conv_output_size, Tensor};

fn final_size(arch: &ArchitectureSpec) -> usize {
    let mut s = arch.image_size;
    for _ in 1..arch.discriminator_channels.len() {
        s = conv_output_size(s, 3, 2, 1).expect("positive size");
    }
    s
}

pub fn init_discriminator(arch: &ArchitectureSpec, rng: &mut impl Rng) -> Result<NetworkParams> {
    let mut p = NetworkParams::new("discriminator", arch.tag("discriminator"));
    let mut ci = 1;
    for (l, &co) in arch.discriminator_channels.iter().enumerate() {
        push_conv(&mut p, rng, &format!("conv{l}"), ci, co, 3)?;
        ci = co;
    }
    let s = final_size(arch);
    push_dense(&mut p, rng, "score", ci * s * s, 1)?;
    Ok(p)
}

/// Raw, unbounded realism scores `[N]`: a stride-1 stem, stride-2 stages,
/// leaky ReLU throughout, no normalization, dense head.
pub fn discriminate(d: &NetworkParams, arch: &ArchitectureSpec, image: &Tensor) -> Result<Tensor> {
    let n = match image.shape() {
        &[n, 1, h, w] if h == arch.image_size && w == arch.image_size => n,
        s => return shape_err(format!("discriminator expects [N,1,{0},{0}], got {s:?}", arch.image_size)),
    };
    let mut h = image.clone();
    for l in 0..arch.discriminator_channels.len() {
        h = conv(d, &format!("conv{l}"), &h, if l == 0 { 1 } else { 2 })?.leaky_relu(LEAKY_SLOPE);
    }
    let flat = h.reshape(&[n, h.numel() / n])?;
    dense(d, "score", &flat)?.reshape(&[n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testing::{images, rng, small_arch, zero_all};

    #[test]
    fn one_score_per_image() {
        let arch = small_arch();
        let d = init_discriminator(&arch, &mut rng(1)).unwrap();
        assert_eq!(discriminate(&d, &arch, &images(3, 16, 2)).unwrap().shape(), &[3]);
        assert!(discriminate(&d, &arch, &images(1, 8, 2)).is_err());
    }

    #[test]
    fn zero_weights_score_zero() {
        let arch = small_arch();
        let d = init_discriminator(&arch, &mut rng(1)).unwrap();
        zero_all(&d);
        assert_eq!(discriminate(&d, &arch, &images(2, 16, 2)).unwrap().to_vec(), vec![0.0, 0.0]);
    }
}
