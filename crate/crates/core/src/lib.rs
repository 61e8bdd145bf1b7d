//! Simulation toolkit for two-qubit Rydberg gates driven by double adiabatic
//! passage through Stark-tuned Förster resonances.
//!
//! Units throughout: time in microseconds, electric field in V/cm, distances
//! in micrometres, and all frequencies as angular frequencies in rad/us.

pub mod angular;
pub mod catalog;
pub mod dynamics;
pub mod error;
pub mod forster;
pub mod gates;
pub mod ode;
pub mod pulses;
pub mod quad;
pub mod stark;

pub use error::{Error, Result};
pub use nalgebra;
pub use num_complex::Complex64 as C64;

pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Converts an ordinary frequency in MHz to rad/us.
pub fn mhz(f: f64) -> f64 {
    TWO_PI * f
}

/// Library version string embedded in output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
