//! Multi-agent text and image generation at desk scale: hashed embeddings,
//! lexicon text agents, procedural image agents, image fusion, consistency
//! scoring, PPO training and an experiment harness.

pub mod agents;
pub mod cli;
pub mod consistency;
pub mod embeddings;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod imageio;
pub mod numerics;
pub mod rl;
pub mod rng;
pub mod text_metrics;

pub use error::{Error, Result};
