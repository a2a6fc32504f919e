//! Anisotropic fractional Lévy random fields and the stochastic PDEs they drive.

pub mod chaos;
pub mod cli;
pub mod error;
pub mod field;
pub mod fracops;
pub mod grid;
pub mod harness;
pub mod levy;
pub mod quad;
pub mod seed;
pub mod spde;

pub use error::{Error, Result};
pub use grid::{GridFunction, GridSpec};
pub use levy::{LevyModel, NoiseRealization};
