//! Bistable memory recurrent units that live in the first quadrant: training
//! with surrogate gradients, post-training quantization, compilation onto a
//! current-mode circuit model and behavioral simulation of that circuit.

pub mod analog;
pub mod analysis;
pub mod autodiff;
pub mod backbone;
pub mod cells;
pub mod data;
pub mod error;
pub mod params;
pub mod quant;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::Tensor;
