//! Simulation, wavelet analysis and limit-law checks for Hermite
//! transforms of long-memory Gaussian processes.

pub mod error;
pub mod estimator;
pub mod harness;
pub mod oracles;
pub mod quad;
pub mod rng;
pub mod scalogram;
pub mod spectral;
pub mod stats;
pub mod synth;
pub mod wavelet;

pub use error::{Error, Result};
