//! Cavity-QED simulation of single-photon emission from an atom in a
//! birefringent optical cavity, with polarisation analysis of the emitted
//! wavepacket and a transmission-spectrum fitter.

pub mod atom;
pub mod characterization;
pub mod dynamics;
pub mod emission;
pub mod error;
pub mod polarization;
pub mod quantum;
pub mod scenario;

pub use error::{Error, Result};

/// 2π × 1 MHz in rad/s.
pub const MHZ: f64 = 2.0 * std::f64::consts::PI * 1e6;
