//! Numerical laboratory for weakly singular Lévy kernels.

pub mod analysis;
pub mod config;
pub mod domain;
pub mod error;
pub mod forms;
pub mod kernels;
pub mod linalg;
pub mod output;
pub mod quad;
pub mod rng;
pub mod solve;
pub mod special;
pub mod suite;
pub mod spectral;

pub use error::{Error, Result};
