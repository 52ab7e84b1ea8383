use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ClassifierTrainConfig, FeatureTrainConfig, GeneratorTrainConfig, Variant};
use super::eval::{f1_score, predict, POSITIVE_CLASS};
use crate::data::{augment, stack_images, synth_dataset, BiasMode, ClassCounts, Provenance, SliceRecord, Split, SynthSpec};
use crate::error::{invalid, Error, Result};
use crate::losses::{content_loss, cross_entropy, gan_d_loss, gan_g_loss, r1_penalty, style_loss, total_generator_loss, LossWeights};
use crate::models::{
    classify, decode_plain, discriminate, encode, extract_features, feature_logits, generate, init_classifier, init_discriminator, init_encoder,
    init_feature_extractor, init_generator, init_plain_decoder, ArchitectureSpec, NetworkParams,
};
use crate::nn::adasin;
use crate::similarity::PairIndex;
use crate::tensor::{adam_step, no_grad, AdamState, Tensor};

const ADAM_EPS: f64 = 1e-8;

fn labels_of(records: &[&SliceRecord]) -> Vec<usize> {
    records.iter().map(|r| r.class_label).collect()
}

/// The unbiased task the feature extractor learns: same renderer, textures
/// drawn independently of the class.
pub fn feature_dataset(data: &SynthSpec, cfg: &FeatureTrainConfig, seed: u64) -> Result<Vec<SliceRecord>> {
    let spec = SynthSpec {
        train: cfg.train,
        val: cfg.val,
        test: ClassCounts { class0: 1, class1: 1 },
        bias_mode: BiasMode::Random,
        ..data.clone()
    };
    synth_dataset(&spec, seed)
}

#[derive(Clone, Debug)]
pub struct FeatureRun {
    /// Frozen copy of the trained extractor.
    pub params: NetworkParams,
    pub val_accuracy: f64,
    /// Mean cross-entropy per epoch.
    pub losses: Vec<f64>,
}

pub fn pretrain_feature_extractor(records: &[SliceRecord], arch: &ArchitectureSpec, cfg: &FeatureTrainConfig, seed: u64) -> Result<FeatureRun> {
    let train: Vec<&SliceRecord> = records.iter().filter(|r| r.split == Split::Train).collect();
    let val: Vec<SliceRecord> = records.iter().filter(|r| r.split == Split::Val).cloned().collect();
    if train.is_empty() {
        return invalid("feature extractor needs training slices");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = init_feature_extractor(arch, &mut rng)?;
    let params = f.tensors();
    let mut adam = AdamState::new(&params, 0.9, 0.999, ADAM_EPS);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&SliceRecord> = chunk.iter().map(|&i| train[i]).collect();
            let x = stack_images(batch.iter().map(|r| &r.image))?;
            let loss = cross_entropy(&feature_logits(&f, arch, &x)?, &labels_of(&batch))?;
            if !loss.item().is_finite() {
                return Err(Error::NonFinite { step: epoch, what: "feature extractor cross-entropy".into() });
            }
            f.zero_grad();
            loss.backward()?;
            adam_step(&params, &mut adam, cfg.learning_rate)?;
            total += loss.item() * chunk.len() as f64;
        }
        losses.push(total / train.len() as f64);
        log::info!("feature extractor epoch {epoch}: loss {:.4}", losses[epoch]);
    }
    let val_accuracy = if val.is_empty() {
        0.0
    } else {
        let mut correct = 0;
        for chunk in val.chunks(64) {
            let logits = no_grad(|| feature_logits(&f, arch, &stack_images(chunk.iter().map(|r| &r.image))?))?;
            correct += logits.data().chunks(2).zip(chunk).filter(|(l, r)| usize::from(l[1] > l[0]) == r.class_label).count();
        }
        correct as f64 / val.len() as f64
    };
    Ok(FeatureRun { params: f.frozen(), val_accuracy, losses })
}

/// Loss values of one generator step; zero where a term is not used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub content: f64,
    pub style: f64,
    pub gan_g: f64,
    pub gan_d: f64,
    pub r1: f64,
}

impl StepLosses {
    pub const NAMES: [&'static str; 5] = ["content", "style", "gan_g", "gan_d", "r1"];

    pub fn values(&self) -> [f64; 5] {
        [self.content, self.style, self.gan_g, self.gan_d, self.r1]
    }
}

/// Trained translation networks. `decoder` is the modulated generator for
/// the mixing variant and the plain decoder for the AdaIN baseline; only the
/// mixing variant has a discriminator.
#[derive(Clone, Debug)]
pub struct GeneratorRun {
    pub variant: Variant,
    pub encoder: NetworkParams,
    pub decoder: NetworkParams,
    pub discriminator: Option<NetworkParams>,
    pub log: Vec<StepLosses>,
}

/// Structure of `x1` rendered with the texture of `x2`.
pub fn translate(variant: Variant, encoder: &NetworkParams, decoder: &NetworkParams, arch: &ArchitectureSpec, x1: &Tensor, x2: &Tensor) -> Result<Tensor> {
    let (s1, _) = encode(encoder, arch, x1)?;
    let (s2, t2) = encode(encoder, arch, x2)?;
    let mixed = adasin(&s1, &s2)?;
    match variant {
        Variant::MixingAdasin => generate(decoder, arch, &mixed, &t2),
        Variant::AdainBaseline => decode_plain(decoder, arch, &mixed),
        Variant::None => invalid("variant none has no generator"),
    }
}

fn pair_lookup<'a>(dataset: &'a [SliceRecord], pairs: &PairIndex) -> Result<Vec<(&'a SliceRecord, &'a SliceRecord)>> {
    let by_id: HashMap<u64, &SliceRecord> = dataset.iter().map(|r| (r.slice_id, r)).collect();
    let mut out = Vec::new();
    for r in dataset.iter().filter(|r| r.split == Split::Train) {
        let Some(entry) = pairs.texture_for(r.slice_id) else {
            return invalid(format!("slice {} has no texture pair", r.slice_id));
        };
        let Some(&partner) = by_id.get(&entry.texture_id) else {
            return invalid(format!("texture source {} of slice {} is not in the dataset", entry.texture_id, r.slice_id));
        };
        out.push((r, partner));
    }
    if out.is_empty() {
        return invalid("no training slices to pair");
    }
    Ok(out)
}

fn check_finite(step: usize, l: &StepLosses) -> Result<()> {
    for (name, v) in StepLosses::NAMES.iter().zip(l.values()) {
        if !v.is_finite() {
            return Err(Error::NonFinite { step, what: (*name).to_string() });
        }
    }
    Ok(())
}

/// Alternating single generator / single discriminator steps on paired
/// training slices. Content is matched to the structure source at
/// `arch.content_layer`, style to the texture source at `arch.style_layers`.
pub fn train_generator(
    dataset: &[SliceRecord],
    pairs: &PairIndex,
    f: &NetworkParams,
    arch: &ArchitectureSpec,
    weights: &LossWeights,
    cfg: &GeneratorTrainConfig,
    variant: Variant,
    seed: u64,
) -> Result<GeneratorRun> {
    weights.validate()?;
    let paired = pair_lookup(dataset, pairs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let encoder = init_encoder(arch, &mut rng)?;
    let (decoder, discriminator) = match variant {
        Variant::MixingAdasin => {
            let g = init_generator(arch, &mut rng)?;
            let d = init_discriminator(arch, &mut rng)?;
            (g, (weights.gan_weight > 0.0).then_some(d))
        }
        Variant::AdainBaseline => (init_plain_decoder(arch, &mut rng)?, None),
        Variant::None => return invalid("variant none has no generator to train"),
    };
    // the plain decoder never reads the texture branch of the encoder
    let mut g_params: Vec<Tensor> = encoder
        .entries()
        .iter()
        .filter(|(name, _)| variant == Variant::MixingAdasin || !name.starts_with("tex"))
        .map(|(_, t)| t.clone())
        .collect();
    g_params.extend(decoder.tensors());
    let mut g_adam = AdamState::new(&g_params, cfg.beta1, cfg.beta2, ADAM_EPS);
    let d_params = discriminator.as_ref().map(NetworkParams::tensors).unwrap_or_default();
    let mut d_adam = AdamState::new(&d_params, cfg.beta1, cfg.beta2, ADAM_EPS);

    let mut layers = arch.style_layers.clone();
    layers.push(arch.content_layer);
    let ns = arch.style_layers.len();
    let mut log = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let batch: Vec<_> = (0..cfg.batch_size).map(|_| paired[rng.random_range(0..paired.len())]).collect();
        let x1 = stack_images(batch.iter().map(|(a, _)| &a.image))?;
        let x2 = stack_images(batch.iter().map(|(_, b)| &b.image))?;
        let (content_target, style_target) = no_grad(|| -> Result<_> {
            let c = extract_features(f, arch, &x1, &[arch.content_layer])?.remove(0);
            Ok((c, extract_features(f, arch, &x2, &arch.style_layers)?))
        })?;

        let out = translate(variant, &encoder, &decoder, arch, &x1, &x2)?;
        let feats = extract_features(f, arch, &out, &layers)?;
        let content = content_loss(&feats[ns], &content_target)?;
        let style = style_loss(&feats[..ns], &style_target)?;
        let gan_g = match &discriminator {
            Some(d) => gan_g_loss(&discriminate(d, arch, &out)?, weights.gan_mode),
            None => Tensor::scalar(0.0),
        };
        let total = total_generator_loss(&content, &style, &gan_g, weights)?;
        let mut losses = StepLosses { content: content.item(), style: style.item(), gan_g: gan_g.item(), gan_d: 0.0, r1: 0.0 };
        check_finite(step, &losses)?;
        encoder.zero_grad();
        decoder.zero_grad();
        total.backward()?;
        adam_step(&g_params, &mut g_adam, cfg.learning_rate)?;

        if let Some(d) = &discriminator {
            let fake = out.detach();
            let d_loss = gan_d_loss(&discriminate(d, arch, &x2)?, &discriminate(d, arch, &fake)?, weights.gan_mode)?;
            let r1 = r1_penalty(d, arch, &x2, weights.r1_gamma)?;
            losses.gan_d = d_loss.item();
            losses.r1 = r1.item();
            check_finite(step, &losses)?;
            d.zero_grad();
            d_loss.add(&r1)?.backward()?;
            adam_step(&d_params, &mut d_adam, cfg.learning_rate)?;
        }
        if step % 100 == 0 {
            log::info!("{} step {step}: content {:.4} style {:.4} gan_g {:.4} gan_d {:.4} r1 {:.4}", variant.name(), losses.content, losses.style, losses.gan_g, losses.gan_d, losses.r1);
        }
        log.push(losses);
    }
    encoder.zero_grad();
    decoder.zero_grad();
    if let Some(d) = &discriminator {
        d.zero_grad();
    }
    Ok(GeneratorRun { variant, encoder, decoder, discriminator, log })
}

/// One generated record per training slice: structure (and class, and lesion
/// mask) from the slice, texture (and bias label) from its pair. Ids continue
/// after `first_id`.
pub fn generate_debiased(run: &GeneratorRun, arch: &ArchitectureSpec, dataset: &[SliceRecord], pairs: &PairIndex, first_id: u64) -> Result<Vec<SliceRecord>> {
    let paired = pair_lookup(dataset, pairs)?;
    let mut out = Vec::with_capacity(paired.len());
    let mut next = first_id;
    for chunk in paired.chunks(32) {
        let x1 = stack_images(chunk.iter().map(|(a, _)| &a.image))?;
        let x2 = stack_images(chunk.iter().map(|(_, b)| &b.image))?;
        let images = no_grad(|| translate(run.variant, &run.encoder, &run.decoder, arch, &x1, &x2))?;
        let px = arch.image_size * arch.image_size;
        for ((s, t), data) in chunk.iter().zip(images.data().chunks(px)) {
            out.push(SliceRecord {
                slice_id: next,
                image: Tensor::new(data.iter().map(|v| v.clamp(-1.0, 1.0)).collect(), &[1, arch.image_size, arch.image_size])?,
                class_label: s.class_label,
                bias_label: t.bias_label,
                split: Split::Train,
                provenance: Provenance::Generated { structure_id: s.slice_id, texture_id: t.slice_id },
                lesion_mask: s.lesion_mask.clone(),
            });
            next += 1;
        }
    }
    Ok(out)
}

/// Seeded subset holding `round(ratio * n)` generated records, in id order.
pub fn mix_subset(generated: &[SliceRecord], ratio: f64, seed: u64) -> Vec<SliceRecord> {
    let keep = (ratio * generated.len() as f64).round() as usize;
    if keep >= generated.len() {
        return generated.to_vec();
    }
    let mut idx: Vec<usize> = (0..generated.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(keep);
    idx.sort_unstable();
    idx.into_iter().map(|i| generated[i].clone()).collect()
}

#[derive(Clone, Debug)]
pub struct ClassifierRun {
    /// Checkpoint of the epoch with the best validation f1.
    pub params: NetworkParams,
    /// Mean training cross-entropy per epoch.
    pub train_loss: Vec<f64>,
    pub val_f1: Vec<f64>,
    pub best_epoch: usize,
}

pub fn train_classifier(train: &[SliceRecord], val: &[SliceRecord], arch: &ArchitectureSpec, cfg: &ClassifierTrainConfig, seed: u64) -> Result<ClassifierRun> {
    if train.is_empty() {
        return invalid("classifier needs training slices");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = init_classifier(arch, &mut rng)?;
    let params = c.tensors();
    let mut adam = AdamState::new(&params, cfg.beta1, cfg.beta2, ADAM_EPS);
    let val_labels: Vec<usize> = val.iter().map(|r| r.class_label).collect();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, usize, NetworkParams)> = None;
    let (mut train_loss, mut val_f1) = (Vec::with_capacity(cfg.epochs), Vec::with_capacity(cfg.epochs));
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&SliceRecord> = chunk.iter().map(|&i| &train[i]).collect();
            let x = match &cfg.augment {
                Some(a) => {
                    let views = batch.iter().map(|r| augment(&r.image, a, &mut rng)).collect::<Result<Vec<_>>>()?;
                    stack_images(views.iter())?
                }
                None => stack_images(batch.iter().map(|r| &r.image))?,
            };
            let loss = cross_entropy(&classify(&c, arch, &x)?, &labels_of(&batch))?;
            if !loss.item().is_finite() {
                return Err(Error::NonFinite { step: epoch, what: "classifier cross-entropy".into() });
            }
            c.zero_grad();
            loss.backward()?;
            adam_step(&params, &mut adam, cfg.learning_rate)?;
            total += loss.item() * chunk.len() as f64;
        }
        train_loss.push(total / train.len() as f64);
        let f1 = if val.is_empty() { 0.0 } else { f1_score(&predict(&c, arch, val)?, &val_labels, POSITIVE_CLASS)? };
        val_f1.push(f1);
        log::info!("classifier epoch {epoch}: loss {:.4} val f1 {f1:.4}", train_loss[epoch]);
        if best.as_ref().is_none_or(|(b, _, _)| f1 > *b) {
            best = Some((f1, epoch, c.frozen()));
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    Ok(ClassifierRun { params, train_loss, val_f1, best_epoch })
}
