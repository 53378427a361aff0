//! Neural collaborative filtering where the non-zero entries of the user and
//! item interaction vectors are trainable parameters.

pub mod cli;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
