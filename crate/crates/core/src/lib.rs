//! Cross-layer attention link prediction for multiplex networks.
//!
//! The crate is generic over the floating-point type through [`Scalar`];
//! the aliases below fix the common choices.

pub mod autodiff;
mod binio;
pub mod embed;
pub mod error;
pub mod graph;
pub mod models;
pub mod scalar;
pub mod train;

pub use binio::fingerprint;
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor64 = autodiff::Tensor<f64>;
pub type Tensor32 = autodiff::Tensor<f32>;
pub type Tape64 = autodiff::Tape<f64>;
pub type ParamStore64 = autodiff::ParamStore<f64>;
