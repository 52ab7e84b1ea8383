//! Desk-scale networks: encoder, generator (and the plain decoder used by the
//! AdaIN variant), discriminator, frozen feature extractor, contrastive
//! embedding network and the residual classifier.

mod arch;
mod classifier;
mod discriminator;
mod embed;
mod encoder;
mod feature;
mod generator;
mod params;

pub use arch::ArchitectureSpec;
pub use classifier::{classify, classify_with_features, init_classifier};
pub use discriminator::{discriminate, init_discriminator};
pub use embed::{embed, init_embedder, l2_normalize_rows};
pub use encoder::{encode, init_encoder};
pub use feature::{extract_features, feature_logits, init_feature_extractor, FEATURE_STAGES};
pub use generator::{decode_plain, generate, init_generator, init_plain_decoder};
pub use params::NetworkParams;

pub(crate) use params::{conv, dense, push_conv, push_dense};
