mod common;

use birefringent_cavity::atom::{rb87_d2_scheme, Rb87Options, TransitionPolarization};
use birefringent_cavity::characterization::{fit_transmission, DoubleLorentzian, FitOptions, TransmissionScan};
use birefringent_cavity::dynamics::*;
use birefringent_cavity::emission::*;
use birefringent_cavity::polarization::*;
use birefringent_cavity::quantum::{DensityMatrix, Operator};
use birefringent_cavity::scenario::{parse_scenario, preset_names};
use birefringent_cavity::MHZ;
use common::fig4_config;
use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn orientation() -> impl Strategy<Value = EigenmodeOrientation> {
    (0.0f64..=1.0, -180.0f64..180.0, -180.0f64..180.0)
        .prop_map(|(a, p1, p2)| EigenmodeOrientation::from_degrees(a, p1, p2).unwrap())
}

fn identity(b: Basis) -> JonesMatrix {
    JonesMatrix::new(Matrix2::identity(), b, b).unwrap()
}

fn mirror(label: &str) -> String {
    label.replace("+1", "#").replace("-1", "+1").replace('#', "-1")
}

fn random_density(space_of: &DensityMatrix, re: &[f64], im: &[f64]) -> DensityMatrix {
    let n = space_of.matrix().nrows();
    let m = DMatrix::from_fn(n, n, |i, j| C64::new(re[(i * n + j) % re.len()], im[(j * n + i) % im.len()]));
    let pos = &m * m.adjoint();
    let tr = pos.trace();
    DensityMatrix::new(space_of.space().clone(), pos / tr).unwrap()
}

fn random_system(
    g: f64,
    kappa: f64,
    delta_p: f64,
    rabi: f64,
    o: EigenmodeOrientation,
    rb87: bool,
) -> SystemConfig {
    let mut cfg = fig4_config(delta_p, rabi);
    cfg.g = g * MHZ;
    cfg.kappa = kappa * MHZ;
    cfg.cavity_orientation = o;
    if rb87 {
        let scheme = rb87_d2_scheme(&Rb87Options::default()).unwrap();
        cfg.gamma = scheme.linewidth();
        cfg.scheme = scheme;
    }
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn basis_round_trips_are_identity(o in orientation()) {
        let ac = atomic_to_cavity_rotation(&o);
        let ca = ac.adjoint();
        prop_assert!(ac.then(&ca).unwrap().distance_up_to_phase(&identity(Basis::Atomic)) < 1e-12);
        let cl = cavity_to_lab(&o);
        let lc = cl.adjoint();
        prop_assert!(cl.then(&lc).unwrap().distance_up_to_phase(&identity(Basis::Cavity)) < 1e-12);
        for m in [ac, ca, cl, lc] {
            prop_assert!(m.unitarity_error() < 1e-12);
        }
    }

    #[test]
    fn waveplates_are_unitary(phi in -720.0f64..720.0) {
        let rad = phi.to_radians();
        prop_assert!(quarter_wave_plate(rad).unitarity_error() < 1e-12);
        prop_assert!(half_wave_plate(rad).unitarity_error() < 1e-12);
        let (a, b) = analyzer_modes(rad);
        prop_assert!(a.inner(&b).unwrap().norm() < 1e-12);
    }

    #[test]
    fn sigma_transitions_mirror_under_m_reversal(zeeman in 0.0f64..60.0, dark in 0.0f64..0.5) {
        let scheme = rb87_d2_scheme(&Rb87Options {
            zeeman_ground_splitting: zeeman * MHZ,
            dark_branching: dark,
            ..Rb87Options::default()
        })
        .unwrap();
        let dark_label = scheme.dark_state().map(str::to_string);
        for t in scheme.transitions() {
            prop_assert!(Some(&t.ground) != dark_label.as_ref() && Some(&t.excited) != dark_label.as_ref());
            let flipped = match t.polarization {
                TransitionPolarization::SigmaPlus => TransitionPolarization::SigmaMinus,
                TransitionPolarization::SigmaMinus => TransitionPolarization::SigmaPlus,
                TransitionPolarization::Pi => TransitionPolarization::Pi,
            };
            let (g, e) = (mirror(&t.ground), mirror(&t.excited));
            let partner = scheme.transitions().iter().find(|u| u.ground == g && u.excited == e && u.polarization == flipped);
            prop_assert!(partner.is_some(), "{} -> {} has no mirror", t.ground, t.excited);
            prop_assert!((partner.unwrap().relative_strength - t.relative_strength).abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_is_hermitian(
        g in 0.0f64..10.0,
        kappa in 0.1f64..5.0,
        delta_p in -30.0f64..30.0,
        rabi in 0.0f64..20.0,
        o in orientation(),
        t_frac in 0.0f64..1.2,
        rb87 in any::<bool>(),
    ) {
        let cfg = random_system(g, kappa, delta_p, rabi, o, rb87);
        let h = build_hamiltonian(&cfg, t_frac * cfg.pulse.duration).unwrap();
        prop_assert!(h.hermiticity_error() <= 1e-12 * h.max_abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lindblad_rhs_is_traceless_and_hermitian(
        g in 0.0f64..10.0,
        kappa in 0.1f64..5.0,
        delta_p in -30.0f64..30.0,
        rabi in 0.0f64..20.0,
        o in orientation(),
        re in proptest::collection::vec(-1.0f64..1.0, 17),
        im in proptest::collection::vec(-1.0f64..1.0, 13),
        rb87 in any::<bool>(),
    ) {
        prop_assume!(re.iter().any(|x| x.abs() > 1e-2));
        let cfg = random_system(g, kappa, delta_p, rabi, o, rb87);
        let rho = random_density(&initial_state(&cfg).unwrap(), &re, &im);
        let h = build_hamiltonian(&cfg, 0.4 * cfg.pulse.duration).unwrap();
        let c = collapse_operators(&cfg).unwrap();
        let d: Operator = lindblad_rhs(&rho, &h, &c).unwrap();
        let scale = d.max_abs().max(1.0);
        prop_assert!(d.trace().norm() < 1e-9 * scale);
        prop_assert!(d.hermiticity_error() < 1e-9 * scale);
    }

    #[test]
    fn birefringence_free_ports_keep_a_constant_split(
        angle in -90.0f64..90.0,
        rabi in 2.0f64..12.0,
    ) {
        // A single Raman path emits one polarisation; with no splitting it
        // never evolves, so every analyser sees a fixed share.
        let cfg = without_birefringence(&fig4_config(0.0, rabi));
        let traj = &simulate_emission(&cfg, &SolverOptions::default()).unwrap();
        let rec = analyzer_wavepackets(traj, angle).unwrap();
        let total: Vec<f64> = rec.flux_port1.iter().zip(&rec.flux_port2).map(|(a, b)| a + b).collect();
        let peak = total.iter().copied().fold(0.0, f64::max);
        let (f1, _) = rec.fractions().unwrap();
        for (p1, tot) in rec.flux_port1.iter().zip(&total) {
            if *tot > 1e-3 * peak {
                prop_assert!((p1 / tot - f1).abs() < 1e-6, "{} vs {f1}", p1 / tot);
            }
        }
    }

    #[test]
    fn free_photon_keeps_its_eigenmode_split(
        delta_p in 0.5f64..20.0,
        o in orientation(),
        re0 in -1.0f64..1.0, im0 in -1.0f64..1.0, re1 in -1.0f64..1.0, im1 in -1.0f64..1.0,
    ) {
        prop_assume!(re0.abs() + im0.abs() > 0.05 && re1.abs() + im1.abs() > 0.05);
        let mut cfg = fig4_config(delta_p, 0.0);
        cfg.cavity_orientation = o;
        let pol = DetectionPolarization::new(
            JonesVector::new(C64::new(re0, im0), C64::new(re1, im1), Basis::Lab).unwrap(),
            "probe",
        )
        .unwrap();
        let rho0 = single_photon_state(&cfg, &pol).unwrap();
        let times = sample_grid(0.0, 400e-9, 161);
        let traj = evolve(&cfg, &rho0, &times, &SolverOptions::default()).unwrap();
        let fx = emission_flux(&traj, &DetectionPolarization::eigenmode(&o, true)).unwrap();
        let fy = emission_flux(&traj, &DetectionPolarization::eigenmode(&o, false)).unwrap();
        let share0 = fx[0] / (fx[0] + fy[0]);
        for (x, y) in fx.iter().zip(&fy) {
            prop_assert!((x / (x + y) - share0).abs() < 1e-6);
        }
    }

    #[test]
    fn fit_recovers_random_well_separated_peaks(
        fwhm in 1.0f64..4.0,
        sep_ratio in 0.6f64..3.0,
        a1 in 0.3f64..1.0,
        a2 in 0.3f64..1.0,
        baseline in 0.0f64..0.1,
        center in -2.0f64..2.0,
    ) {
        let splitting = sep_ratio * fwhm;
        let truth = DoubleLorentzian::shared(
            baseline,
            [a1, a2],
            [center - splitting / 2.0, center + splitting / 2.0],
            fwhm,
        );
        let half = splitting / 2.0 + 6.0 * fwhm;
        let scan = TransmissionScan::synthesize(&truth, center - half, center + half, 401).unwrap();
        let fit = fit_transmission(&scan, None, &FitOptions::default()).unwrap();
        prop_assert!((fit.splitting - splitting).abs() < 0.01 * splitting, "{} vs {splitting}", fit.splitting);
        prop_assert!((fit.fwhm - fwhm).abs() < 0.01 * fwhm);
    }

    #[test]
    fn config_round_trip_is_idempotent(
        which in 0usize..9,
        delta_p in -30.0f64..30.0,
        g in 0.0f64..10.0,
        alpha in 0.0f64..=1.0,
        phi in -180.0f64..180.0,
        angles in proptest::collection::vec(-90.0f64..90.0, 0..4),
    ) {
        let name = preset_names()[which];
        let overrides = vec![
            format!("system.delta_p_mhz={delta_p:?}"),
            format!("system.g_mhz={g:?}"),
            format!("system.orientation.alpha={alpha:?}"),
            format!("system.orientation.phi2_deg={phi:?}"),
            format!("outputs.qwp_angles_deg=[{}]", angles.iter().map(|a| format!("{a:?}")).collect::<Vec<_>>().join(",")),
        ];
        let s = parse_scenario(None, Some(name), &overrides).unwrap();
        prop_assert_eq!(s.system.delta_p_mhz, delta_p);
        let once = s.to_toml().unwrap();
        let back = parse_scenario(Some(&once), None, &[]).unwrap();
        prop_assert_eq!(back.to_toml().unwrap(), once);
        prop_assert_eq!(back.config_hash().unwrap(), s.config_hash().unwrap());
    }
}
