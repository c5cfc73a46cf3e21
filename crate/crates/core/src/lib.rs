//! Expected Grad-CAM and related attribution methods on small CNNs, with a
//! reverse-mode autodiff core, explanation-quality metrics and a saturation
//! study.

pub mod attribution;
pub mod cli;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod ops;
pub mod saturation;
pub mod tape;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
