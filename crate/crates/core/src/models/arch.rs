use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sizes of every network. Defaults are desk scale: one core, minutes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchitectureSpec {
    pub image_size: usize,
    pub base_channels: usize,
    pub structure_channels: usize,
    pub texture_dim: usize,
    /// One modulated layer per resolution: H/4, H/2, H.
    pub generator_channels: Vec<usize>,
    /// Stride-1 stem followed by stride-2 stages.
    pub discriminator_channels: Vec<usize>,
    /// One residual block per entry; the stem uses the first width.
    pub classifier_channels: Vec<usize>,
    /// One entry per feature-extractor stage.
    pub feature_channels: Vec<usize>,
    pub content_layer: usize,
    pub style_layers: Vec<usize>,
    pub embed_channels: Vec<usize>,
    pub embed_dim: usize,
}

impl Default for ArchitectureSpec {
    fn default() -> Self {
        Self {
            image_size: 64,
            base_channels: 16,
            structure_channels: 32,
            texture_dim: 32,
            generator_channels: vec![32, 16, 8],
            discriminator_channels: vec![8, 16, 32, 32],
            classifier_channels: vec![8, 16, 32],
            feature_channels: vec![8, 16, 32, 32],
            content_layer: 2,
            style_layers: vec![1, 2],
            embed_channels: vec![8, 16, 32],
            embed_dim: 32,
        }
    }
}

impl ArchitectureSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("architecture: {m}")));
        // the feature extractor halves three times with exact 2x2 pooling
        if self.image_size < 8 || self.image_size % 8 != 0 {
            return bad(format!("image_size {} must be a positive multiple of 8", self.image_size));
        }
        let counts = [
            self.base_channels,
            self.structure_channels,
            self.texture_dim,
            self.embed_dim,
        ];
        if counts.contains(&0) {
            return bad("channel counts must be positive".into());
        }
        for (name, v, len) in [
            ("generator_channels", &self.generator_channels, Some(3)),
            ("discriminator_channels", &self.discriminator_channels, None),
            ("classifier_channels", &self.classifier_channels, None),
            ("feature_channels", &self.feature_channels, Some(4)),
            ("embed_channels", &self.embed_channels, None),
        ] {
            if v.is_empty() || v.contains(&0) {
                return bad(format!("{name} must be non-empty and positive"));
            }
            if let Some(l) = len {
                if v.len() != l {
                    return bad(format!("{name} must have {l} entries"));
                }
            }
        }
        let stages = self.feature_channels.len();
        if !(1..=stages).contains(&self.content_layer) || self.style_layers.iter().any(|l| !(1..=stages).contains(l)) {
            return bad(format!("feature layer ids must lie in 1..={stages}"));
        }
        Ok(())
    }

    pub fn structure_size(&self) -> usize {
        self.image_size / 4
    }

    /// Tag recorded in checkpoints: network kind plus the full spec.
    pub fn tag(&self, kind: &str) -> String {
        format!("{kind}:{}", serde_json::to_string(self).expect("spec serializes"))
    }
}
