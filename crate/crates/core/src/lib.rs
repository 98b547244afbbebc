#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod error;
pub mod fast;
pub mod evt;
pub mod fft;
pub mod glm;
pub mod grid;
pub mod normal;
pub mod optimize;
pub mod phantom;
pub mod scalar;
pub mod smoothing;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Volume64 = grid::Volume<f64>;
pub type Volume32 = grid::Volume<f32>;
pub type FastConfig64 = fast::FastConfig<f64>;
pub type ActivationState64 = fast::ActivationState<f64>;
