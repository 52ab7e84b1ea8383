//! De-biasing by texture mixing: a small reverse-mode autodiff engine, the
//! structure/texture generator built on it, and the experiment pipeline that
//! trains classifiers on biased versus de-biased synthetic data.

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod losses;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod similarity;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{grad, no_grad, Tensor};
