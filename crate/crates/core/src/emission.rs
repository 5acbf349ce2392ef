//! Observables of the emitted photon: polarisation-resolved flux, analyser
//! wavepackets, routing curves, efficiency and the polarisation beat.

use std::f64::consts::PI;

use nalgebra::Matrix2;

use crate::dynamics::{evolve, initial_state, sample_grid, samples_for, SolverOptions, SystemConfig, Trajectory};
use crate::error::{Error, Result};
use crate::polarization::{analyzer_modes, cavity_to_lab, Basis, EigenmodeOrientation, JonesVector};
use crate::quantum::{DensityMatrix, HilbertSpace, Operator, C64};

/// Reported QWP angle minus the physical fast-axis angle used by the
/// analyser model (degrees). Calibrated once so that the simulated σ− routing
/// maximum of the experimental configuration lands at −68.5°; the physical
/// maximum sits at −79.41°.
pub const QWP_ANGLE_OFFSET_DEG: f64 = 10.9;

/// A lab-frame polarisation to detect.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionPolarization {
    jones: JonesVector,
    label: String,
}

impl DetectionPolarization {
    pub fn new(jones: JonesVector, label: impl Into<String>) -> Result<Self> {
        if jones.basis() != Basis::Lab {
            return Err(Error::InvalidState(format!(
                "detection polarisation must be given in the lab basis, got {}",
                jones.basis()
            )));
        }
        Ok(Self {
            jones,
            label: label.into(),
        })
    }

    pub fn horizontal() -> Self {
        Self::lab(JonesVector::horizontal(), "H")
    }

    pub fn vertical() -> Self {
        Self::lab(JonesVector::vertical(), "V")
    }

    pub fn diagonal() -> Self {
        Self::lab(JonesVector::linear(PI / 4.0), "D")
    }

    pub fn antidiagonal() -> Self {
        Self::lab(JonesVector::linear(-PI / 4.0), "A")
    }

    /// `|+⟩ = (|H⟩ + i|V⟩)/√2`
    pub fn plus() -> Self {
        Self::lab(JonesVector::circular_plus(), "+")
    }

    /// `|−⟩ = (|H⟩ − i|V⟩)/√2`
    pub fn minus() -> Self {
        Self::lab(JonesVector::circular_minus(), "-")
    }

    /// Polarisation of cavity eigenmode X (`first = true`) or Y.
    pub fn eigenmode(orientation: &EigenmodeOrientation, first: bool) -> Self {
        let v = if first {
            JonesVector::first(Basis::Cavity)
        } else {
            JonesVector::second(Basis::Cavity)
        };
        let lab = cavity_to_lab(orientation).apply(&v).expect("cavity basis");
        Self::lab(lab, if first { "X" } else { "Y" })
    }

    fn lab(jones: JonesVector, label: &str) -> Self {
        Self {
            jones,
            label: label.into(),
        }
    }

    pub fn jones(&self) -> &JonesVector {
        &self.jones
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn orthogonal(&self) -> Self {
        Self {
            jones: self.jones.orthogonal(),
            label: format!("{}⊥", self.label),
        }
    }

    /// `(d_X, d_Y)` with `â_pol = d_X â_X + d_Y â_Y`.
    pub fn cavity_coefficients(&self, orientation: &EigenmodeOrientation) -> (C64, C64) {
        let v = cavity_to_lab(orientation).adjoint().apply(&self.jones).expect("lab basis");
        let c = v.components();
        (c[0].conj(), c[1].conj())
    }
}

/// `â_pol` in the simulation frame at time `t`.
pub fn detection_mode_operator(pol: &DetectionPolarization, cfg: &SystemConfig, t: f64) -> Result<Operator> {
    let model = crate::dynamics::Model::new(cfg)?;
    let (dx, dy) = pol.cavity_coefficients(&cfg.cavity_orientation);
    let a = &model.a_x().scale(dx) + &model.a_y().scale(dy);
    Ok(model.frame().rotate(&a, t))
}

/// `M_jk = Tr(ρ â_j† â_k)` over `{X, Y}` at every sample, in the simulation frame.
pub fn coherence_matrices(traj: &Trajectory) -> Vec<Matrix2<C64>> {
    let model = traj.model();
    let ops = [model.a_x(), model.a_y()];
    let mut products = Vec::with_capacity(4);
    for j in 0..2 {
        for k in 0..2 {
            products.push((&ops[j].adjoint() * ops[k]).into_matrix());
        }
    }
    traj.states()
        .iter()
        .map(|rho| {
            let m = rho.matrix();
            let v: Vec<C64> = products
                .iter()
                .map(|p| crate::quantum::trace_product(m, p))
                .collect();
            Matrix2::new(v[0], v[1], v[2], v[3])
        })
        .collect()
}

/// Atom in the scheme's initial level with one photon in `pol`, no pump history.
pub fn single_photon_state(cfg: &SystemConfig, pol: &DetectionPolarization) -> Result<DensityMatrix> {
    let space = HilbertSpace::atom_cavity(cfg.scheme.len(), cfg.fock_truncation)?;
    let atom = cfg.scheme.index_of(cfg.scheme.initial_level())?;
    let (dx, dy) = pol.cavity_coefficients(&cfg.cavity_orientation);
    // a_pol† = d_X* a_X† + d_Y* a_Y†
    let ket = space.basis_ket(&[atom, 1, 0])? * dx.conj() + space.basis_ket(&[atom, 0, 1])? * dy.conj();
    DensityMatrix::from_ket(&space, &ket)
}

/// Photon flux (probability per second) leaving the cavity in `pol`.
pub fn emission_flux(traj: &Trajectory, pol: &DetectionPolarization) -> Result<Vec<f64>> {
    let cfg = traj.config();
    let d = pol.cavity_coefficients(&cfg.cavity_orientation);
    Ok(flux_from_coherences(traj, &coherence_matrices(traj), d))
}

fn flux_from_coherences(traj: &Trajectory, coh: &[Matrix2<C64>], d: (C64, C64)) -> Vec<f64> {
    let cfg = traj.config();
    let (wx, wy) = cfg.mode_frequencies();
    let d = [d.0, d.1];
    let w = [wx, wy];
    traj.times()
        .iter()
        .zip(coh)
        .map(|(&t, m)| {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..2 {
                for k in 0..2 {
                    acc += d[j].conj() * d[k] * C64::from_polar(1.0, (w[j] - w[k]) * t) * m[(j, k)];
                }
            }
            2.0 * cfg.kappa * acc.re
        })
        .collect()
}

/// Total flux `2κ⟨â_X†â_X + â_Y†â_Y⟩`.
pub fn total_flux(traj: &Trajectory) -> Vec<f64> {
    let k2 = 2.0 * traj.config().kappa;
    coherence_matrices(traj)
        .iter()
        .map(|m| k2 * (m[(0, 0)].re + m[(1, 1)].re))
        .collect()
}

/// Composite Simpson rule on an arbitrary (possibly non-uniform) grid.
pub fn integrate_samples(times: &[f64], values: &[f64]) -> f64 {
    let n = times.len().min(values.len());
    if n < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut i = 0;
    while i + 2 < n {
        let (h0, h1) = (times[i + 1] - times[i], times[i + 2] - times[i + 1]);
        let (f0, f1, f2) = (values[i], values[i + 1], values[i + 2]);
        if h0 <= 0.0 || h1 <= 0.0 {
            acc += 0.5 * h0 * (f0 + f1) + 0.5 * h1 * (f1 + f2);
        } else {
            let s = h0 + h1;
            acc += s / 6.0 * ((2.0 - h1 / h0) * f0 + s * s / (h0 * h1) * f1 + (2.0 - h0 / h1) * f2);
        }
        i += 2;
    }
    if i + 1 < n {
        acc += 0.5 * (times[i + 1] - times[i]) * (values[i] + values[i + 1]);
    }
    acc
}

/// `η = ∫ 2κ ⟨â_X†â_X + â_Y†â_Y⟩ dt`.
pub fn emission_efficiency(traj: &Trajectory) -> f64 {
    integrate_samples(traj.times(), &total_flux(traj))
}

/// Port fluxes behind a QWP at `qwp_angle_deg` followed by a PBS.
#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketRecord {
    pub times: Vec<f64>,
    pub flux_port1: Vec<f64>,
    pub flux_port2: Vec<f64>,
    pub qwp_angle: f64,
    pub efficiency: f64,
}

impl WavepacketRecord {
    pub fn port_probabilities(&self) -> (f64, f64) {
        (
            integrate_samples(&self.times, &self.flux_port1),
            integrate_samples(&self.times, &self.flux_port2),
        )
    }

    /// Fraction of the detected photon in each port.
    pub fn fractions(&self) -> Result<(f64, f64)> {
        let (p1, p2) = self.port_probabilities();
        let total = p1 + p2;
        if !(total > 1e-12) {
            return Err(Error::UndefinedFraction(format!(
                "no emission detected at QWP angle {}°",
                self.qwp_angle
            )));
        }
        Ok((p1 / total, p2 / total))
    }
}

/// The two analyser ports (transmitted, reflected) as detection polarisations,
/// for a reported QWP angle in degrees.
pub fn analyzer_polarizations(qwp_angle_deg: f64) -> (DetectionPolarization, DetectionPolarization) {
    let physical = (qwp_angle_deg - QWP_ANGLE_OFFSET_DEG).to_radians();
    let (h, v) = analyzer_modes(physical);
    (
        DetectionPolarization::lab(h, "port1"),
        DetectionPolarization::lab(v, "port2"),
    )
}

pub fn analyzer_wavepackets(traj: &Trajectory, qwp_angle_deg: f64) -> Result<WavepacketRecord> {
    let coh = coherence_matrices(traj);
    Ok(wavepackets_from(traj, &coh, qwp_angle_deg))
}

fn wavepackets_from(traj: &Trajectory, coh: &[Matrix2<C64>], qwp_angle_deg: f64) -> WavepacketRecord {
    let o = &traj.config().cavity_orientation;
    let (p1, p2) = analyzer_polarizations(qwp_angle_deg);
    let flux_port1 = flux_from_coherences(traj, coh, p1.cavity_coefficients(o));
    let flux_port2 = flux_from_coherences(traj, coh, p2.cavity_coefficients(o));
    let total: Vec<f64> = flux_port1.iter().zip(&flux_port2).map(|(a, b)| a + b).collect();
    WavepacketRecord {
        times: traj.times().to_vec(),
        efficiency: integrate_samples(traj.times(), &total),
        flux_port1,
        flux_port2,
        qwp_angle: qwp_angle_deg,
    }
}

/// One point of a routing curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoutingPoint {
    pub qwp_angle: f64,
    pub fraction_port1: f64,
    pub fraction_port2: f64,
}

/// Birefringence-free variant of `cfg`: no splitting, eigenmodes aligned
/// with the atomic circular basis.
pub fn without_birefringence(cfg: &SystemConfig) -> SystemConfig {
    let mut out = cfg.clone();
    out.delta_p = 0.0;
    out.cavity_orientation = EigenmodeOrientation::circular();
    out
}

/// Sample grid covering the pulse and the cavity ring-down after it.
pub fn emission_window(cfg: &SystemConfig) -> Vec<f64> {
    let tail = if cfg.kappa > 0.0 { 12.0 / cfg.kappa } else { 0.0 };
    let span = cfg.pulse.duration + tail;
    let n = samples_for(span, cfg.delta_p, 40, 801);
    sample_grid(0.0, span, n)
}

/// Simulates `cfg` over its emission window from the default initial state.
pub fn simulate_emission(cfg: &SystemConfig, opts: &SolverOptions) -> Result<Trajectory> {
    let rho0 = initial_state(cfg)?;
    evolve(cfg, &rho0, &emission_window(cfg), opts)
}

/// Integrated port fractions per QWP angle for one simulated photon.
pub fn routing_curve(cfg: &SystemConfig, angles_deg: &[f64], birefringence_on: bool) -> Result<Vec<RoutingPoint>> {
    if angles_deg.is_empty() {
        return Err(Error::InvalidConfig("routing curve needs at least one angle".into()));
    }
    let cfg = if birefringence_on {
        cfg.clone()
    } else {
        without_birefringence(cfg)
    };
    let traj = simulate_emission(&cfg, &SolverOptions::default())?;
    routing_from_trajectory(&traj, angles_deg)
}

pub fn routing_from_trajectory(traj: &Trajectory, angles_deg: &[f64]) -> Result<Vec<RoutingPoint>> {
    let coh = coherence_matrices(traj);
    angles_deg
        .iter()
        .map(|&a| {
            let (f1, f2) = wavepackets_from(traj, &coh, a).fractions()?;
            Ok(RoutingPoint {
                qwp_angle: a,
                fraction_port1: f1,
                fraction_port2: f2,
            })
        })
        .collect()
}

/// Samples dimmer than this fraction of the peak total flux are ignored.
pub const DEFAULT_BRIGHT_FRACTION: f64 = 0.05;

/// Dominant beat of the normalised contrast `(f1 − f2)/(f1 + f2)` over the
/// region where the photon is bright. Zero crossings seed a least-squares
/// sinusoid fit, which stays unbiased for a non-integer number of periods.
pub fn oscillation_frequency(times: &[f64], flux1: &[f64], flux2: &[f64]) -> Result<f64> {
    oscillation_frequency_above(times, flux1, flux2, DEFAULT_BRIGHT_FRACTION)
}

/// [`oscillation_frequency`] with an explicit brightness cut. Noise-free
/// simulated flux tolerates cuts far below the default.
pub fn oscillation_frequency_above(times: &[f64], flux1: &[f64], flux2: &[f64], bright_fraction: f64) -> Result<f64> {
    if !(bright_fraction > 0.0 && bright_fraction < 1.0) {
        return Err(Error::InvalidSeries(format!(
            "brightness cut must lie in (0, 1), got {bright_fraction}"
        )));
    }
    let n = times.len();
    if flux1.len() != n || flux2.len() != n {
        return Err(Error::InvalidSeries("flux series and time grid differ in length".into()));
    }
    let peak = flux1
        .iter()
        .zip(flux2)
        .map(|(a, b)| a + b)
        .fold(0.0f64, f64::max);
    if !(peak > 0.0) {
        return Err(Error::InsufficientOscillations("no flux".into()));
    }
    let bright = bright_fraction * peak;
    let contrast: Vec<Option<f64>> = flux1
        .iter()
        .zip(flux2)
        .map(|(a, b)| {
            let s = a + b;
            (s > bright).then(|| (a - b) / s)
        })
        .collect();
    let samples: Vec<(f64, f64)> = times
        .iter()
        .zip(&contrast)
        .filter_map(|(&t, c)| c.map(|c| (t, c)))
        .collect();
    // remove the mean so a biased oscillation still crosses zero
    let mean = samples.iter().map(|s| s.1).sum::<f64>() / samples.len().max(1) as f64;
    let amplitude = samples.iter().map(|s| (s.1 - mean).abs()).fold(0.0f64, f64::max);
    if amplitude < 1e-3 {
        return Err(Error::InsufficientOscillations(format!(
            "contrast varies by only {amplitude:.2e}"
        )));
    }
    let mut crossings = Vec::new();
    for i in 1..n {
        if let (Some(a), Some(b)) = (contrast[i - 1], contrast[i]) {
            let (a, b) = (a - mean, b - mean);
            if (a < 0.0) != (b < 0.0) {
                let f = a / (a - b);
                crossings.push(times[i - 1] + f * (times[i] - times[i - 1]));
            }
        }
    }
    if crossings.len() < 3 {
        return Err(Error::InsufficientOscillations(format!(
            "found {} zero crossings, need at least 3",
            crossings.len()
        )));
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    let seed = PI * (crossings.len() - 1) as f64 / span;
    Ok(refine_sinusoid(&samples, seed))
}

/// Residual of the best `a + b cos ωt + c sin ωt` fit.
fn sinusoid_residual(samples: &[(f64, f64)], w: f64) -> f64 {
    let t0 = samples[0].0;
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for &(t, y) in samples {
        let r = nalgebra::Vector3::new(1.0, (w * (t - t0)).cos(), (w * (t - t0)).sin());
        ata += r * r.transpose();
        aty += r * y;
    }
    let yy: f64 = samples.iter().map(|s| s.1 * s.1).sum();
    match ata.cholesky() {
        Some(ch) => yy - aty.dot(&ch.solve(&aty)),
        None => yy,
    }
}

fn refine_sinusoid(samples: &[(f64, f64)], seed: f64) -> f64 {
    // coarse scan ±30% then golden-section on the best bracket
    let steps = 240;
    let (lo, hi) = (0.7 * seed, 1.3 * seed);
    let dw = (hi - lo) / steps as f64;
    let best = (0..=steps)
        .map(|i| lo + dw * i as f64)
        .min_by(|a, b| sinusoid_residual(samples, *a).total_cmp(&sinusoid_residual(samples, *b)))
        .unwrap_or(seed);
    let (mut a, mut b) = (best - dw, best + dw);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if sinusoid_residual(samples, c) < sinusoid_residual(samples, d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}
