//! Detection of likely-wrong predictions of small convolutional classifiers.
//!
//! Two signals are computed for every prediction: the feature-map conductance
//! pattern at a convolutional layer (classified by a trained error detector)
//! and the label change rate under weight-mutated model variants. A unified
//! classifier combines both.

pub mod attribution;
pub mod data;
pub mod detector;
pub mod model;
pub mod mutation;
pub mod pipeline;
pub mod tensor;

mod codec;
mod error;
mod table;

pub use error::{Error, Result};
pub use tensor::Tensor;
