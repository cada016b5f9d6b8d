//! Symbolic deconstruction and compositional synthesis of sparse multivariate
//! time series, with domain-adaptation tests for judging synthetic data.
//!
//! The pipeline runs from raw `(stay, feature, time, value)` records through
//! dense hourly series, blockwise symbols, compositional synthesis, a masked
//! forecaster and the evaluation harness.

pub mod augment;
pub mod cds;
pub mod cli;
pub mod data;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod forecast;
pub mod io;
pub mod pipeline;
pub mod rng;
pub mod symbolize;
pub mod synthetic;

pub use error::{Error, Result};
