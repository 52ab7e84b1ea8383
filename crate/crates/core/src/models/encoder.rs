use rand::Rng;

use super::{conv, push_conv, ArchitectureSpec, NetworkParams};
use crate::error::{shape_err, Result};
use crate::nn::{StructureFeature, TextureVector, LEAKY_SLOPE};
use crate::tensor::Tensor;

pub fn init_encoder(arch: &ArchitectureSpec, rng: &mut impl Rng) -> Result<NetworkParams> {
    let (b, cs) = (arch.base_channels, arch.structure_channels);
    let mut p = NetworkParams::new("encoder", arch.tag("encoder"));
    push_conv(&mut p, rng, "stem", 1, b, 3)?;
    push_conv(&mut p, rng, "down1", b, b, 3)?;
    push_conv(&mut p, rng, "down2", b, cs, 3)?;
    push_conv(&mut p, rng, "tex1", cs, 2 * b, 3)?;
    push_conv(&mut p, rng, "tex2", 2 * b, 2 * b, 3)?;
    push_conv(&mut p, rng, "tex_out", 2 * b, arch.texture_dim, 1)?;
    Ok(p)
}

/// Splits images `[N,1,H,W]` into a structure feature (after two stride-2
/// stages, `[N,Cs,H/4,W/4]`) and a texture vector (two more stride-2 stages,
/// a 1x1 projection to `dt` channels, then global average pooling).
pub fn encode(e: &NetworkParams, arch: &ArchitectureSpec, image: &Tensor) -> Result<(StructureFeature, TextureVector)> {
    match image.shape() {
        &[_, 1, h, w] if h == arch.image_size && w == arch.image_size => {}
        s => return shape_err(format!("encoder expects [N,1,{0},{0}], got {s:?}", arch.image_size)),
    }
    let h = conv(e, "stem", image, 1)?.leaky_relu(LEAKY_SLOPE);
    let h = conv(e, "down1", &h, 2)?.leaky_relu(LEAKY_SLOPE);
    let s = conv(e, "down2", &h, 2)?.leaky_relu(LEAKY_SLOPE);
    let u = conv(e, "tex1", &s, 2)?.leaky_relu(LEAKY_SLOPE);
    let u = conv(e, "tex2", &u, 2)?.leaky_relu(LEAKY_SLOPE);
    let t = conv(e, "tex_out", &u, 1)?.global_avg_pool()?;
    Ok((StructureFeature::new(s)?, TextureVector::new(t)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testing::{images, rng, small_arch, zero_all};

    #[test]
    fn default_shapes() {
        let arch = ArchitectureSpec { structure_channels: 64, texture_dim: 64, ..ArchitectureSpec::default() };
        let e = init_encoder(&arch, &mut rng(1)).unwrap();
        let (s, t) = encode(&e, &arch, &images(2, 64, 2)).unwrap();
        assert_eq!(s.tensor().shape(), &[2, 64, 16, 16]);
        assert_eq!(t.tensor().shape(), &[2, 64]);
    }

    #[test]
    fn zero_weights_give_zero_features() {
        let arch = small_arch();
        let e = init_encoder(&arch, &mut rng(1)).unwrap();
        zero_all(&e);
        let (s, t) = encode(&e, &arch, &images(3, 16, 4)).unwrap();
        assert!(s.tensor().to_vec().iter().chain(t.tensor().to_vec().iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_size_rejected() {
        let arch = small_arch();
        let e = init_encoder(&arch, &mut rng(1)).unwrap();
        assert!(encode(&e, &arch, &images(1, 32, 0)).is_err());
    }
}
