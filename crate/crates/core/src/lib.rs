//! Multi-platoon C-V2X simulation with age-of-information dynamics, and
//! multi-agent actor-critic learners that allocate subchannels, modes and
//! transmit powers to platoon leaders.

pub mod channel;
pub mod env;
pub mod error;
pub mod experiment;
pub mod marl;
pub mod nn;
pub mod reward;

pub use error::{Error, Result};
