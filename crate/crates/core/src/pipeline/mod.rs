//! The experiment: feature-extractor and contrastive pretraining, pairing,
//! generator training, de-biased set generation, classifiers on the biased
//! and the de-biased training sets, evaluation and Grad-CAM panels.

mod config;
mod eval;
mod run;
mod train;

pub use config::*;
pub use eval::*;
pub use run::*;
pub use train::*;
