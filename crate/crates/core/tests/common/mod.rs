#![allow(dead_code)]

use birefringent_cavity::atom::{three_level_lambda, ThreeLevelOptions};
use birefringent_cavity::dynamics::{PulseProfile, PulseShape, SystemConfig};
use birefringent_cavity::polarization::EigenmodeOrientation;
use birefringent_cavity::MHZ;

/// Ideal Λ-system, linear cavity, {g, κ, γ} = {4, 2, 0} MHz, 1 μs pump,
/// eigenmodes centred on Raman resonance.
pub fn fig4_config(delta_p_mhz: f64, rabi_mhz: f64) -> SystemConfig {
    SystemConfig {
        g: 4.0 * MHZ,
        kappa: 2.0 * MHZ,
        gamma: 0.0,
        delta_p: delta_p_mhz * MHZ,
        omega_l: 0.0,
        cavity_orientation: EigenmodeOrientation::linear(),
        cavity_center_detuning: 0.0,
        pulse: PulseProfile {
            peak_rabi: rabi_mhz * MHZ,
            duration: 1e-6,
            shape: PulseShape::Sin2Amplitude,
            detuning: 0.0,
        },
        scheme: three_level_lambda(ThreeLevelOptions::default()).unwrap(),
        fock_truncation: 2,
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
