pub mod encoders;
pub mod error;
pub mod exec;
pub mod harness;
pub mod inhibition;
pub mod metrics;
pub mod pattern_memory;
pub mod persistence;
pub mod rng;
pub mod sdr;
pub mod temporal_pooling;
pub mod transition_memory;

pub use error::{Error, Result};
pub use sdr::Sdr;
