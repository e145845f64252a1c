//! Virtual vibration test with iteration-free excitation harmonization.
//!
//! The crate is `no_std` (with `alloc`). It contains the plant model, the
//! adaptive Fourier estimator, the harmonic controllers, the sampled-data
//! test simulator, a periodic-orbit reference (shooting and continuation),
//! the iterative baseline and the stability analysis.

#![no_std]

extern crate alloc;

pub mod analysis;
pub mod baseline;
pub mod control;
pub mod error;
pub mod estimator;
pub mod model;
pub mod reference;
pub mod scenario;
pub mod sim;
pub mod spectrum;
pub mod tuning;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use spectrum::HarmonicSpectrum;
