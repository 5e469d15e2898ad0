//! Scalar wave-optics model of a two-lens cavity that performs the unary
//! (classical-wave) Grover search: an oracle phase plate in the image plane,
//! a second plate on the focal spot, and mirrors closing the loop.

pub mod analysis;
pub mod cli;
pub mod engine;
pub mod error;
pub mod field;
pub mod optics;
pub mod series;
pub mod twomode;

pub use error::{Error, Result};
