use rand::Rng;

use super::{conv, dense, push_conv, push_dense, ArchitectureSpec, NetworkParams};
use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

/// Stride-2 stem, then residual stages (the first at stride 1, the rest at
/// stride 2), global average pooling and a dense 2-way head.
pub fn init_classifier(arch: &ArchitectureSpec, rng: &mut impl Rng) -> Result<NetworkParams> {
    let ch = &arch.classifier_channels;
    let mut p = NetworkParams::new("classifier", arch.tag("classifier"));
    push_conv(&mut p, rng, "stem", 1, ch[0], 3)?;
    let mut ci = ch[0];
    for (b, &co) in ch.iter().enumerate() {
        push_conv(&mut p, rng, &format!("block{b}.conv1"), ci, co, 3)?;
        push_conv(&mut p, rng, &format!("block{b}.conv2"), co, co, 3)?;
        if b > 0 || ci != co {
            push_conv(&mut p, rng, &format!("block{b}.skip"), ci, co, 1)?;
        }
        ci = co;
    }
    push_dense(&mut p, rng, "head", ci, 2)?;
    Ok(p)
}

fn block(c: &NetworkParams, b: usize, x: &Tensor) -> Result<Tensor> {
    let stride = if b == 0 { 1 } else { 2 };
    let y = conv(c, &format!("block{b}.conv1"), x, stride)?.relu();
    let y = conv(c, &format!("block{b}.conv2"), &y, 1)?;
    let skip_name = format!("block{b}.skip");
    let skip = if c.contains(&format!("{skip_name}.weight")) {
        conv(c, &skip_name, x, stride)?
    } else {
        x.clone()
    };
    Ok(y.add(&skip)?.relu())
}

/// Logits `[N,2]` together with the last convolutional feature map.
pub fn classify_with_features(c: &NetworkParams, arch: &ArchitectureSpec, image: &Tensor) -> Result<(Tensor, Tensor)> {
    match image.shape() {
        &[_, 1, h, w] if h == arch.image_size && w == arch.image_size => {}
        s => return shape_err(format!("classifier expects [N,1,{0},{0}], got {s:?}", arch.image_size)),
    }
    let mut h = conv(c, "stem", image, 2)?.relu();
    for b in 0..arch.classifier_channels.len() {
        h = block(c, b, &h)?;
    }
    let logits = dense(c, "head", &h.global_avg_pool()?)?;
    Ok((logits, h))
}

pub fn classify(c: &NetworkParams, arch: &ArchitectureSpec, image: &Tensor) -> Result<Tensor> {
    Ok(classify_with_features(c, arch, image)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testing::{images, rng, small_arch, zero_all};

    #[test]
    fn two_logits_per_image() {
        let arch = small_arch();
        let c = init_classifier(&arch, &mut rng(1)).unwrap();
        let logits = classify(&c, &arch, &images(4, 16, 3)).unwrap();
        assert_eq!(logits.shape(), &[4, 2]);
        for row in logits.to_vec().chunks(2) {
            let m = row[0].max(row[1]);
            let (a, b) = ((row[0] - m).exp(), (row[1] - m).exp());
            assert!((a / (a + b) + b / (a + b) - 1.0).abs() < 1e-12);
        }
        assert!(classify(&c, &arch, &images(1, 8, 3)).is_err());
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let arch = small_arch();
        let c = init_classifier(&arch, &mut rng(1)).unwrap();
        zero_all(&c);
        assert!(classify(&c, &arch, &images(2, 16, 3)).unwrap().to_vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn features_are_last_block_output() {
        let arch = small_arch();
        let c = init_classifier(&arch, &mut rng(1)).unwrap();
        let (_, feats) = classify_with_features(&c, &arch, &images(2, 16, 3)).unwrap();
        assert_eq!(feats.shape()[..2], [2, *arch.classifier_channels.last().unwrap()]);
    }
}
