pub mod error;
pub mod tensor;

pub use error::{Error, Result};
pub mod layers;
pub mod params;
pub mod network;
pub mod data;
mod io;
pub mod training;
pub mod eval;
pub mod config;
pub mod checkpoint;
pub mod cli;

#[cfg(test)]
pub(crate) mod testutil;
