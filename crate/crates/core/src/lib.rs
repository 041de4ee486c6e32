pub mod error;
pub mod qstate;
pub mod rng;

pub use error::{Error, Result};
pub mod capacity;
pub mod config;
pub mod experiments;
pub mod floquet;
pub mod kernel;
pub mod learn;
pub mod noise;
