use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::atom::LevelScheme;
use crate::error::{Error, Result};
use crate::polarization::EigenmodeOrientation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    /// Ω(t) = Ω̄ sin²(πt/T): a sin⁴ intensity profile.
    Sin2Amplitude,
    /// Ω(t) = Ω̄ sin⁴(πt/T).
    Sin4Amplitude,
    /// Ω(t) = Ω̄ on [0, T].
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseProfile {
    /// Peak Rabi frequency Ω̄ (rad/s), before angular factors.
    pub peak_rabi: f64,
    /// Pulse length T (s).
    pub duration: f64,
    pub shape: PulseShape,
    /// Extra pump detuning for this pulse (rad/s).
    pub detuning: f64,
}

impl PulseProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "pulse duration must be positive, got {}",
                self.duration
            )));
        }
        if !self.peak_rabi.is_finite() || !self.detuning.is_finite() {
            return Err(Error::InvalidConfig("pulse parameters must be finite".into()));
        }
        Ok(())
    }
}

pub fn pulse_amplitude(p: &PulseProfile, t: f64) -> f64 {
    if !(0.0..=p.duration).contains(&t) {
        return 0.0;
    }
    let s = (PI * t / p.duration).sin();
    match p.shape {
        PulseShape::Sin2Amplitude => p.peak_rabi * s * s,
        PulseShape::Sin4Amplitude => p.peak_rabi * s.powi(4),
        PulseShape::Constant => p.peak_rabi,
    }
}

/// Full physical parameterisation of one emitter–cavity run. Rates are
/// angular frequencies (rad/s), times are seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Atom–cavity coupling for a transition of the scheme's reference strength.
    pub g: f64,
    /// Cavity field decay rate; intensity FWHM is 2κ.
    pub kappa: f64,
    /// Atomic amplitude decay rate.
    pub gamma: f64,
    /// Eigenmode splitting ω_X − ω_Y.
    pub delta_p: f64,
    /// Pump offset from two-photon Raman resonance.
    pub omega_l: f64,
    pub cavity_orientation: EigenmodeOrientation,
    /// Mean eigenmode frequency relative to Raman resonance.
    pub cavity_center_detuning: f64,
    pub pulse: PulseProfile,
    pub scheme: LevelScheme,
    pub fock_truncation: usize,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("g", self.g),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("delta_p", self.delta_p),
            ("omega_l", self.omega_l),
            ("cavity_center_detuning", self.cavity_center_detuning),
        ];
        for (name, v) in named {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} is not finite")));
            }
        }
        if self.g < 0.0 {
            return Err(Error::InvalidConfig("g must be non-negative".into()));
        }
        if self.kappa < 0.0 {
            return Err(Error::InvalidConfig("kappa must be non-negative".into()));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidConfig("gamma must be non-negative".into()));
        }
        if self.fock_truncation < 2 {
            return Err(Error::InvalidConfig("fock_truncation must be at least 2".into()));
        }
        if (self.scheme.linewidth() - self.gamma).abs() > 1e-9 * self.gamma.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma {} disagrees with the level scheme linewidth {}",
                self.gamma,
                self.scheme.linewidth()
            )));
        }
        self.pulse.validate()?;
        self.scheme.validate()
    }

    /// `(ω_X, ω_Y)` in the simulation frame.
    pub fn mode_frequencies(&self) -> (f64, f64) {
        let center = self.scheme.raman_photon_frequency() + self.cavity_center_detuning;
        (center + self.delta_p / 2.0, center - self.delta_p / 2.0)
    }

    /// Pump frequency in the simulation frame.
    pub fn laser_frequency(&self) -> f64 {
        self.scheme.raman_pump_frequency() + self.omega_l + self.pulse.detuning
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pulse(shape: PulseShape) -> PulseProfile {
        PulseProfile {
            peak_rabi: 3.0,
            duration: 2.0,
            shape,
            detuning: 0.0,
        }
    }

    #[test]
    fn sin2_amplitude_examples() {
        let p = pulse(PulseShape::Sin2Amplitude);
        assert_relative_eq!(pulse_amplitude(&p, 1.0), 3.0);
        assert!(pulse_amplitude(&p, 0.0).abs() < 1e-30);
        assert!(pulse_amplitude(&p, 2.0).abs() < 1e-30);
        assert_relative_eq!(pulse_amplitude(&p, 0.5), 1.5, epsilon = 1e-14);
        assert_eq!(pulse_amplitude(&p, -0.1), 0.0);
        assert_eq!(pulse_amplitude(&p, 2.1), 0.0);
    }

    #[test]
    fn other_shapes() {
        let p = pulse(PulseShape::Sin4Amplitude);
        assert_relative_eq!(pulse_amplitude(&p, 0.5), 0.75, epsilon = 1e-14);
        let c = pulse(PulseShape::Constant);
        assert_eq!(pulse_amplitude(&c, 0.0), 3.0);
        assert_eq!(pulse_amplitude(&c, 2.0), 3.0);
        assert_eq!(pulse_amplitude(&c, 2.5), 0.0);
    }

    #[test]
    fn rejects_bad_duration() {
        let mut p = pulse(PulseShape::Constant);
        p.duration = 0.0;
        assert!(p.validate().is_err());
        p.duration = f64::NAN;
        assert!(p.validate().is_err());
    }
}
