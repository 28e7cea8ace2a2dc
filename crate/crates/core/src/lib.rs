pub mod agent;
pub mod checkpoint;
pub mod config;
pub mod envs;
mod error;
pub mod labeler;
pub mod mdp;
pub mod metrics;
pub mod nn;
pub mod runner;
pub mod rng;
pub mod strategy;

pub use error::{Error, Result};
