//! Simulation and post-processing toolkit for interference-based quantum
//! random number generators with gain-switched lasers.
//!
//! The crate models the interference of successive laser pulses, the
//! digitizer that samples it, the resulting probability densities, the
//! min-entropy and reduction-factor bookkeeping, and the randomness
//! extractors that turn raw samples into output bits.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adc;
pub mod config;
pub mod curve;
pub mod error;
pub mod extract;
pub mod io;
pub mod pdf;
pub mod reduction;
pub mod runner;
pub mod signal;
pub mod sim;

pub use error::{Error, Result};
