//! Attention encoder with a guidance-driven dynamic decoder for the covering
//! salesman problem, trained by REINFORCE against a greedy-rollout baseline.

pub mod decoder;
pub mod encoder;
mod error;
mod params;
pub mod seeds;
pub mod trainer;

pub use decoder::{rollout, rollout_on_tape, Decode, Rollout};
pub use encoder::{encode, EncoderOutput};
pub use error::ModelError;
pub use params::{init_params, load_model, save_model, EncoderConfig};

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
