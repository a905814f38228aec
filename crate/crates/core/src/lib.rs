//! Elastic Step DQN and its baselines on classic-control tasks.

pub mod agents;
pub mod approximator;
pub mod clustering;
pub mod config;
pub mod envs;
pub mod experiment;
pub mod error;
pub mod memory;
pub mod rng;

pub use error::{Error, Result};
