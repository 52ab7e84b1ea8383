use rand::Rng;

use super::{conv, dense, push_conv, push_dense, ArchitectureSpec, NetworkParams};
use crate::error::{invalid, shape_err, Result};
use crate::nn::LEAKY_SLOPE;
use crate::tensor::Tensor;

pub const FEATURE_STAGES: usize = 4;

/// Four conv stages (full, 1/2, 1/4, 1/8 resolution) plus a 2-way head used
/// only while pretraining it as a shape classifier.
pub fn init_feature_extractor(arch: &ArchitectureSpec, rng: &mut impl Rng) -> Result<NetworkParams> {
    let mut p = NetworkParams::new("feature_extractor", arch.tag("feature_extractor"));
    let mut ci = 1;
    for (k, &co) in arch.feature_channels.iter().enumerate() {
        push_conv(&mut p, rng, &format!("stage{}", k + 1), ci, co, 3)?;
        ci = co;
    }
    push_dense(&mut p, rng, "head", ci, 2)?;
    Ok(p)
}

fn stages(f: &NetworkParams, arch: &ArchitectureSpec, image: &Tensor, upto: usize) -> Result<Vec<Tensor>> {
    match image.shape() {
        &[_, 1, h, w] if h == arch.image_size && w == arch.image_size => {}
        s => return shape_err(format!("feature extractor expects [N,1,{0},{0}], got {s:?}", arch.image_size)),
    }
    let mut out = Vec::with_capacity(upto);
    let mut h = image.clone();
    for k in 1..=upto {
        if k > 1 {
            h = h.avg_down2()?;
        }
        h = conv(f, &format!("stage{k}"), &h, 1)?.leaky_relu(LEAKY_SLOPE);
        out.push(h.clone());
    }
    Ok(out)
}

/// Stage outputs for 1-based `layer_ids`, in the requested order.
pub fn extract_features(f: &NetworkParams, arch: &ArchitectureSpec, image: &Tensor, layer_ids: &[usize]) -> Result<Vec<Tensor>> {
    if let Some(bad) = layer_ids.iter().find(|&&l| l == 0 || l > FEATURE_STAGES) {
        return invalid(format!("feature layer id {bad} outside 1..={FEATURE_STAGES}"));
    }
    let deepest = layer_ids.iter().copied().max().unwrap_or(0);
    let all = stages(f, arch, image, deepest)?;
    Ok(layer_ids.iter().map(|&l| all[l - 1].clone()).collect())
}

/// Classification logits `[N,2]` of the pretraining head.
pub fn feature_logits(f: &NetworkParams, arch: &ArchitectureSpec, image: &Tensor) -> Result<Tensor> {
    let last = stages(f, arch, image, FEATURE_STAGES)?.pop().expect("four stages");
    dense(f, "head", &last.global_avg_pool()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testing::{images, rng, small_arch};

    #[test]
    fn stages_halve_spatially() {
        let arch = small_arch();
        let f = init_feature_extractor(&arch, &mut rng(1)).unwrap();
        let x = images(2, 16, 2);
        let maps = extract_features(&f, &arch, &x, &[1, 2, 3, 4]).unwrap();
        let sizes: Vec<usize> = maps.iter().map(|m| m.shape()[2]).collect();
        assert_eq!(sizes, vec![16, 8, 4, 2]);
        assert!(maps.iter().all(|m| m.all_finite()));
        let again = extract_features(&f, &arch, &x, &[3, 1]).unwrap();
        assert_eq!(again[0].to_vec(), maps[2].to_vec());
        assert_eq!(again[1].to_vec(), maps[0].to_vec());
        assert_eq!(feature_logits(&f, &arch, &x).unwrap().shape(), &[2, 2]);
    }

    #[test]
    fn bad_layer_ids_rejected() {
        let arch = small_arch();
        let f = init_feature_extractor(&arch, &mut rng(1)).unwrap();
        let x = images(1, 16, 2);
        assert!(extract_features(&f, &arch, &x, &[0]).is_err());
        assert!(extract_features(&f, &arch, &x, &[5]).is_err());
    }

    #[test]
    fn frozen_extractor_passes_gradient_to_image_only() {
        let arch = small_arch();
        let f = init_feature_extractor(&arch, &mut rng(1)).unwrap().frozen();
        let x = Tensor::parameter(images(1, 16, 2).to_vec(), &[1, 1, 16, 16]).unwrap();
        extract_features(&f, &arch, &x, &[2]).unwrap().remove(0).sum().backward().unwrap();
        assert!(x.grad().is_some());
        assert!(f.tensors().iter().all(|t| t.grad().is_none()));
    }
}
