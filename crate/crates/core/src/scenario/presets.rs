use std::collections::BTreeMap;

use crate::atom::{DEFAULT_DARK_BRANCHING, DEFAULT_RAMAN_OFFSET, DEFAULT_ZEEMAN_SPLITTING};
use crate::dynamics::PulseShape;
use crate::polarization::AtomicPolarization;
use crate::MHZ;

use super::{
    AnalysisBasis, CavityTuning, OrientationSpec, OutputSpec, PulseSpec, RoutingSpec, Scenario, SchemeSpec,
    SolverSpec, SystemSpec,
};

pub const DEFAULT_PRESET: &str = "experiment";

const NAMES: [&str; 9] = [
    "experiment",
    "fig2c",
    "fig3",
    "fig4a_0MHz",
    "fig4a_4MHz",
    "fig4a_20MHz",
    "fig4b_0MHz",
    "fig4b_4MHz",
    "fig4b_20MHz",
];

pub fn preset_names() -> &'static [&'static str] {
    &NAMES
}

/// The ⁸⁷Rb operating point: measured cavity, 333 ns sin⁴-intensity pump.
fn experiment() -> Scenario {
    Scenario {
        name: "experiment".into(),
        system: SystemSpec {
            g_mhz: 4.77,
            kappa_mhz: 1.77,
            gamma_mhz: 3.03,
            delta_p_mhz: 3.471,
            omega_l_mhz: 0.0,
            cavity_tuning: CavityTuning::Centered,
            cavity_center_detuning_mhz: 0.0,
            fock_truncation: 2,
            initial_level: None,
            orientation: OrientationSpec {
                alpha: 0.888,
                phi1_deg: 115.1,
                phi2_deg: -40.1,
            },
            pulse: PulseSpec {
                peak_rabi_mhz: 10.0,
                duration_ns: 333.0,
                shape: PulseShape::Sin2Amplitude,
                detuning_mhz: 0.0,
            },
            scheme: SchemeSpec::Rb87D2 {
                photon: AtomicPolarization::Minus,
                zeeman_splitting_mhz: DEFAULT_ZEEMAN_SPLITTING / MHZ,
                raman_offset_mhz: DEFAULT_RAMAN_OFFSET / MHZ,
                dark_branching: DEFAULT_DARK_BRANCHING,
                level_energies_mhz: BTreeMap::new(),
            },
        },
        solver: SolverSpec {
            tail_ns: 1100.0,
            ..SolverSpec::default()
        },
        outputs: OutputSpec::default(),
        sweep: None,
    }
}

/// Ideal Λ-system in a linearly birefringent cavity, 1 μs pump.
fn fig4(name: &str, delta_p_mhz: f64, rabi_mhz: f64, tuning: CavityTuning) -> Scenario {
    Scenario {
        name: name.into(),
        system: SystemSpec {
            g_mhz: 4.0,
            kappa_mhz: 2.0,
            gamma_mhz: 0.0,
            delta_p_mhz,
            omega_l_mhz: 0.0,
            cavity_tuning: tuning,
            cavity_center_detuning_mhz: 0.0,
            fock_truncation: 2,
            initial_level: None,
            orientation: OrientationSpec {
                alpha: 1.0,
                phi1_deg: 0.0,
                phi2_deg: 0.0,
            },
            pulse: PulseSpec {
                peak_rabi_mhz: rabi_mhz,
                duration_ns: 1000.0,
                shape: PulseShape::Sin2Amplitude,
                detuning_mhz: 0.0,
            },
            scheme: SchemeSpec::ThreeLevel {
                one_photon_detuning_mhz: 0.0,
            },
        },
        solver: SolverSpec {
            tail_ns: 1000.0,
            ..SolverSpec::default()
        },
        outputs: OutputSpec {
            qwp_angles_deg: Vec::new(),
            bases: vec![AnalysisBasis::Circular, AnalysisBasis::Linear, AnalysisBasis::Cavity],
            oscillation_basis: Some(AnalysisBasis::Circular),
            routing: None,
        },
        sweep: None,
    }
}

pub fn preset(name: &str) -> Option<Scenario> {
    let s = match name {
        "experiment" => experiment(),
        "fig2c" => {
            let mut s = experiment();
            s.name = "fig2c".into();
            s.outputs.routing = Some(RoutingSpec {
                start_deg: -90.0,
                stop_deg: 90.0,
                step_deg: 2.5,
                compare_without_birefringence: true,
            });
            s
        }
        "fig3" => {
            let mut s = experiment();
            s.name = "fig3".into();
            s.outputs.qwp_angles_deg = vec![-22.5, 0.0, 22.5];
            s
        }
        "fig4a_0MHz" => fig4(name, 0.0, 7.0, CavityTuning::Centered),
        "fig4a_4MHz" => fig4(name, 4.0, 7.0, CavityTuning::Centered),
        "fig4a_20MHz" => fig4(name, 20.0, 2.0, CavityTuning::Centered),
        "fig4b_0MHz" => fig4(name, 0.0, 7.0, CavityTuning::XOnResonance),
        "fig4b_4MHz" => fig4(name, 4.0, 7.0, CavityTuning::XOnResonance),
        "fig4b_20MHz" => fig4(name, 20.0, 2.0, CavityTuning::XOnResonance),
        _ => return None,
    };
    Some(s)
}
