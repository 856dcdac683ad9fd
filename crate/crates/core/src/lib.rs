//! Controller/world-model reinforcement learning.
//!
//! A recurrent world model (`world_model`) learns to compress the agent's
//! lifelong interaction history (`history`) by predictive coding, scored by a
//! two-part code length. Controllers (`controllers`) exploit the model either
//! by reading its activations as a Markov state or by evolving read/write
//! connections into a frozen copy of it. The `orchestrator` alternates
//! controller phases and model "sleep" phases; `curiosity` turns compression
//! progress into intrinsic reward.

pub mod controllers;
pub mod curiosity;
pub mod env;
pub mod error;
pub mod history;
pub mod nn;
pub mod orchestrator;
pub mod rng;
pub mod textfmt;
pub mod world_model;

pub use error::{Error, Result};
