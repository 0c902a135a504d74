//! Picard iteration in scales of Banach spaces, with a truncated correlation
//! hierarchy for mutation-selection dynamics as the worked instance.

pub mod cli;
pub mod config;
pub mod error;
pub mod kimura;
pub mod linear;
pub mod oracles;
pub mod scale;
pub mod solver;
pub mod stability;

pub use error::{Error, Result};
