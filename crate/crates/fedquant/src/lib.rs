pub mod cluster;
pub mod error;
pub mod fusion;
pub mod privacy;
pub mod quantizer;
pub mod rng;
pub mod task;

pub use error::{Error, Result};
