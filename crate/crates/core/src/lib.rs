//! Liquid state machine with structurally plastic excitatory connections.

pub mod config;
pub mod error;
pub mod harness;
pub mod liquid;
pub mod metrics;
pub mod patterns;
pub mod plasticity;
pub mod readout;
pub mod rng;
pub mod sim;

pub use config::LiquidConfig;
pub use error::{Error, Result};
pub use liquid::{build_liquid, Liquid};
