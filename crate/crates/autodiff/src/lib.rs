//! Dense `f64` arrays with a reverse-mode tape, the handful of neural layers
//! the attention model needs, Adam, and a flat checkpoint format.

mod array;
pub mod checkpoint;
mod error;
mod gemm;
pub mod layers;
mod params;
mod tape;

pub use array::Array;
pub use error::AdError;
pub use params::{AdamConfig, ParamStore};
pub use tape::{Gradients, Tape, Var};

pub type Result<T, E = AdError> = std::result::Result<T, E>;
