//! Triple-path (time, sensor, frequency) transformer for diagnosing fault
//! cases of optical fiber amplifiers from condition-monitoring windows.
//!
//! The numeric modules are generic over [`scalar::Scalar`]; the aliases
//! below fix the element type to `f64`, which training and gradient
//! checking use throughout.

pub mod autodiff;
pub mod dataset;
pub mod error;
pub mod features;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor = tensor::Tensor<f64>;
pub type Tape = autodiff::Tape<f64>;
pub type Window = features::Window<f64>;
pub type Scaler = features::Scaler<f64>;
pub type DecoderFeatures = features::DecoderFeatures<f64>;
pub type WindowedDataset = dataset::WindowedDataset<f64>;
pub type ItstModel = model::ItstModel<f64>;
