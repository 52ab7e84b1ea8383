use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{AugmentConfig, ClassCounts, SynthSpec};
use crate::error::{invalid, Result};
use crate::losses::LossWeights;
use crate::models::ArchitectureSpec;
use crate::similarity::{ContrastiveConfig, PairSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Texture-modulated generator on AdaSIN-mixed structure features.
    MixingAdasin,
    /// AdaSIN on structure features decoded by a plain decoder, no texture
    /// modulation and no adversarial term.
    AdainBaseline,
    /// No generated data: the classifier sees only the biased set.
    None,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::MixingAdasin, Variant::AdainBaseline, Variant::None];

    pub fn name(self) -> &'static str {
        match self {
            Variant::MixingAdasin => "mixing_adasin",
            Variant::AdainBaseline => "adain_baseline",
            Variant::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }
}

/// Pretraining of the frozen feature extractor on an unbiased variant of the
/// synthetic task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureTrainConfig {
    pub train: ClassCounts,
    pub val: ClassCounts,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for FeatureTrainConfig {
    fn default() -> Self {
        Self {
            train: ClassCounts { class0: 200, class1: 200 },
            val: ClassCounts { class0: 100, class1: 100 },
            epochs: 12,
            batch_size: 32,
            learning_rate: 1e-3,
        }
    }
}

/// Paper scale is 40000 steps; the desk default is far smaller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for GeneratorTrainConfig {
    fn default() -> Self {
        Self { steps: 1500, batch_size: 8, learning_rate: 0.002, beta1: 0.0, beta2: 0.99 }
    }
}

/// Paper scale is 100 epochs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Crops, flips and intensity jitter; off unless set.
    pub augment: Option<AugmentConfig>,
}

impl Default for ClassifierTrainConfig {
    fn default() -> Self {
        Self { epochs: 30, batch_size: 64, learning_rate: 0.001, beta1: 0.9, beta2: 0.999, augment: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: SynthSpec,
    pub arch: ArchitectureSpec,
    pub losses: LossWeights,
    pub contrastive: ContrastiveConfig,
    pub pair_space: PairSpace,
    pub feature: FeatureTrainConfig,
    pub generator: GeneratorTrainConfig,
    pub classifier: ClassifierTrainConfig,
    /// Fraction of the generated set added to the biased training set.
    pub mix_ratio: f64,
    pub variant: Variant,
    /// Test slices rendered as Grad-CAM panels.
    pub gradcam_slices: usize,
    /// Generated slices rendered as structure | texture | output panels.
    pub sample_panels: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            data: SynthSpec::default(),
            arch: ArchitectureSpec::default(),
            // the adversarial term is off at desk scale; gan_weight 1 restores it
            losses: LossWeights { gan_weight: 0.0, ..LossWeights::default() },
            contrastive: ContrastiveConfig::default(),
            pair_space: PairSpace::Embedding,
            feature: FeatureTrainConfig::default(),
            generator: GeneratorTrainConfig::default(),
            classifier: ClassifierTrainConfig::default(),
            mix_ratio: 1.0,
            variant: Variant::MixingAdasin,
            gradcam_slices: 8,
            sample_panels: 8,
        }
    }
}

impl ExperimentConfig {
    /// Seconds-scale setting (16x16 images, a few dozen slices, a handful of
    /// steps) for smoke tests; results are meaningless.
    pub fn smoke() -> Self {
        let arch = ArchitectureSpec {
            image_size: 16,
            base_channels: 4,
            structure_channels: 8,
            texture_dim: 8,
            generator_channels: vec![8, 4, 4],
            discriminator_channels: vec![4, 4, 8, 8],
            classifier_channels: vec![4, 8],
            feature_channels: vec![4, 4, 8, 8],
            embed_channels: vec![4, 8],
            embed_dim: 8,
            ..ArchitectureSpec::default()
        };
        let data = SynthSpec {
            image_size: 16,
            train: ClassCounts { class0: 8, class1: 6 },
            val: ClassCounts { class0: 3, class1: 3 },
            test: ClassCounts { class0: 4, class1: 4 },
            ..SynthSpec::default()
        };
        Self {
            data,
            arch,
            // keeps the discriminator and R1 path exercised
            losses: LossWeights::default(),
            contrastive: ContrastiveConfig { epochs: 1, batch_size: 8, queue_size: 16, augment: AugmentConfig::contrastive(16), ..ContrastiveConfig::default() },
            feature: FeatureTrainConfig {
                train: ClassCounts { class0: 8, class1: 8 },
                val: ClassCounts { class0: 4, class1: 4 },
                epochs: 1,
                batch_size: 8,
                ..FeatureTrainConfig::default()
            },
            generator: GeneratorTrainConfig { steps: 3, batch_size: 2, ..GeneratorTrainConfig::default() },
            classifier: ClassifierTrainConfig { epochs: 2, batch_size: 8, ..ClassifierTrainConfig::default() },
            gradcam_slices: 2,
            sample_panels: 2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.arch.validate()?;
        self.losses.validate()?;
        self.contrastive.validate()?;
        if self.data.image_size != self.arch.image_size {
            return invalid(format!(
                "data image_size {} differs from architecture image_size {}",
                self.data.image_size, self.arch.image_size
            ));
        }
        let f = &self.feature;
        let g = &self.generator;
        let c = &self.classifier;
        let counts = [
            f.epochs,
            f.batch_size,
            f.train.class0,
            f.train.class1,
            f.val.class0,
            f.val.class1,
            g.steps,
            g.batch_size,
            c.epochs,
            c.batch_size,
        ];
        if counts.contains(&0) {
            return invalid("training counts must be positive");
        }
        if !(f.learning_rate > 0.0 && g.learning_rate > 0.0 && c.learning_rate > 0.0) {
            return invalid("learning rates must be positive");
        }
        for b in [g.beta1, g.beta2, c.beta1, c.beta2] {
            if !(0.0..1.0).contains(&b) {
                return invalid(format!("Adam beta {b} outside [0,1)"));
            }
        }
        if !(0.0..=1.0).contains(&self.mix_ratio) {
            return invalid(format!("mix_ratio {} outside [0,1]", self.mix_ratio));
        }
        Ok(())
    }

    /// Canonical JSON: struct fields in declaration order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON, hex.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }

    /// Independent seed for one named stage.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        derive_seed(self.seed, stage)
    }
}

pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_and_validates() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn smoke_preset_is_valid() {
        ExperimentConfig::smoke().validate().unwrap();
    }

    #[test]
    fn strict_schema() {
        assert!(ExperimentConfig::from_json(r#"{"seed": 2, "surprise": true}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"generator": {"steps": 10, "lr": 1}}"#).is_err());
        let c = ExperimentConfig::from_json(r#"{"seed": 2}"#).unwrap();
        assert_eq!(c.generator, GeneratorTrainConfig::default());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { seed: 2, ..a.clone() };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn invalid_values_rejected() {
        let mut c = ExperimentConfig::default();
        c.mix_ratio = 1.5;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.arch.image_size = 32;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.generator.steps = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn variants_parse() {
        for v in Variant::ALL {
            assert_eq!(Variant::parse(v.name()), Some(v));
        }
        assert_eq!(Variant::parse("bogus"), None);
        assert_eq!(serde_json::to_string(&Variant::AdainBaseline).unwrap(), "\"adain_baseline\"");
    }

    #[test]
    fn stage_seeds_differ() {
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_ne!(derive_seed(1, "a"), derive_seed(2, "a"));
        assert_eq!(derive_seed(1, "a"), derive_seed(1, "a"));
    }
}
