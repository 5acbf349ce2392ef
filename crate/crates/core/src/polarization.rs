//! Jones calculus for the three polarisation bases of the model.
//!
//! * `Atomic`: circular `{|+⟩, |−⟩}` coupled by σ± transitions.
//! * `Cavity`: the resonator eigenmodes `{|X⟩, |Y⟩}`.
//! * `Lab`: linear `{|H⟩, |V⟩}`, the common reference.
//!
//! Basis changes use the SU(2) parameterisation
//!
//! ```text
//! R = [ e^{iφ1} α          -e^{-iφ2} √(1-α²) ]
//!     [ e^{iφ2} √(1-α²)     e^{-iφ1} α       ]
//! ```
//!
//! The cavity orientation is stored as the cavity→lab rotation, which is
//! what a transmission polarimetry measurement yields. Everything else is
//! derived by composition and adjoints.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::fmt;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::C64;

pub const UNITARITY_TOLERANCE: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Atomic,
    Cavity,
    Lab,
}

impl Basis {
    pub fn as_str(self) -> &'static str {
        match self {
            Basis::Atomic => "atomic",
            Basis::Cavity => "cavity",
            Basis::Lab => "lab",
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Circular polarisation of an atomic transition photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AtomicPolarization {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl AtomicPolarization {
    fn index(self) -> usize {
        match self {
            AtomicPolarization::Plus => 0,
            AtomicPolarization::Minus => 1,
        }
    }
}

/// A pure, normalised polarisation state written in a given basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector {
    components: Vector2<C64>,
    basis: Basis,
}

impl JonesVector {
    /// Normalises the input; errors on the zero vector.
    pub fn new(c0: C64, c1: C64, basis: Basis) -> Result<Self> {
        let v = Vector2::new(c0, c1);
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite Jones vector".into()));
        }
        Ok(Self {
            components: v / C64::new(norm, 0.0),
            basis,
        })
    }

    pub fn horizontal() -> Self {
        Self {
            components: Vector2::new(ONE, ZERO),
            basis: Basis::Lab,
        }
    }

    pub fn vertical() -> Self {
        Self {
            components: Vector2::new(ZERO, ONE),
            basis: Basis::Lab,
        }
    }

    /// `(|H⟩ + i|V⟩)/√2`
    pub fn circular_plus() -> Self {
        Self {
            components: Vector2::new(ONE, I) * C64::new(FRAC_1_SQRT_2, 0.0),
            basis: Basis::Lab,
        }
    }

    /// `(|H⟩ − i|V⟩)/√2`
    pub fn circular_minus() -> Self {
        Self {
            components: Vector2::new(ONE, -I) * C64::new(FRAC_1_SQRT_2, 0.0),
            basis: Basis::Lab,
        }
    }

    /// Linear polarisation at `angle` (radians) from horizontal.
    pub fn linear(angle: f64) -> Self {
        Self {
            components: Vector2::new(C64::new(angle.cos(), 0.0), C64::new(angle.sin(), 0.0)),
            basis: Basis::Lab,
        }
    }

    /// First basis vector (`|+⟩`, `|X⟩` or `|H⟩`).
    pub fn first(basis: Basis) -> Self {
        Self {
            components: Vector2::new(ONE, ZERO),
            basis,
        }
    }

    pub fn second(basis: Basis) -> Self {
        Self {
            components: Vector2::new(ZERO, ONE),
            basis,
        }
    }

    pub fn components(&self) -> Vector2<C64> {
        self.components
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    /// `⟨self|other⟩`; errors if the bases differ.
    pub fn inner(&self, other: &JonesVector) -> Result<C64> {
        if self.basis != other.basis {
            return Err(Error::InvalidState(format!(
                "inner product across bases {} and {}",
                self.basis, other.basis
            )));
        }
        Ok(self.components.dotc(&other.components))
    }

    /// Orthogonal partner with the same handedness convention:
    /// `(a, b) ↦ (−b*, a*)`.
    pub fn orthogonal(&self) -> Self {
        Self {
            components: Vector2::new(-self.components[1].conj(), self.components[0].conj()),
            basis: self.basis,
        }
    }

    /// Global phase fixed so the first nonzero component is real and positive.
    pub fn phase_normalized(&self) -> Self {
        let pivot = if self.components[0].norm() > 1e-15 {
            self.components[0]
        } else {
            self.components[1]
        };
        let phase = pivot / C64::new(pivot.norm(), 0.0);
        Self {
            components: self.components * phase.conj(),
            basis: self.basis,
        }
    }

    /// Phase-insensitive comparison: `|⟨a|b⟩| ≈ 1`.
    pub fn same_state(&self, other: &JonesVector, tol: f64) -> bool {
        self.basis == other.basis && (1.0 - self.components.dotc(&other.components).norm()).abs() <= tol
    }
}

/// A lossless 2×2 map between polarisation bases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesMatrix {
    entries: Matrix2<C64>,
    from: Basis,
    to: Basis,
}

impl JonesMatrix {
    pub fn new(entries: Matrix2<C64>, from: Basis, to: Basis) -> Result<Self> {
        let m = Self { entries, from, to };
        let err = m.unitarity_error();
        if err > 1e-9 {
            return Err(Error::NonUnitary(err));
        }
        Ok(m)
    }

    pub fn entries(&self) -> &Matrix2<C64> {
        &self.entries
    }

    pub fn from_basis(&self) -> Basis {
        self.from
    }

    pub fn to_basis(&self) -> Basis {
        self.to
    }

    /// `max |R†R − I|`
    pub fn unitarity_error(&self) -> f64 {
        (self.entries.adjoint() * self.entries - Matrix2::identity())
            .iter()
            .fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    pub fn determinant(&self) -> C64 {
        self.entries.determinant()
    }

    /// The inverse map (adjoint), with bases swapped.
    pub fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.adjoint(),
            from: self.to,
            to: self.from,
        }
    }

    /// `next ∘ self`: apply `self` first.
    pub fn then(&self, next: &JonesMatrix) -> Result<Self> {
        if self.to != next.from {
            return Err(Error::InvalidState(format!(
                "cannot compose {}→{} with {}→{}",
                self.from, self.to, next.from, next.to
            )));
        }
        Ok(Self {
            entries: next.entries * self.entries,
            from: self.from,
            to: next.to,
        })
    }

    pub fn apply(&self, v: &JonesVector) -> Result<JonesVector> {
        if v.basis != self.from {
            return Err(Error::InvalidState(format!(
                "vector in {} basis given to a {}→{} map",
                v.basis, self.from, self.to
            )));
        }
        Ok(JonesVector {
            components: self.entries * v.components,
            basis: self.to,
        })
    }

    /// Max-norm distance after removing the best global phase.
    pub fn distance_up_to_phase(&self, other: &JonesMatrix) -> f64 {
        let overlap = (self.entries.adjoint() * other.entries).trace();
        let phase = if overlap.norm() > 0.0 {
            overlap / C64::new(overlap.norm(), 0.0)
        } else {
            ONE
        };
        (self.entries * phase - other.entries)
            .iter()
            .fold(0.0_f64, |m, z| m.max(z.norm()))
    }
}

/// Cavity→lab rotation parameters `(α, φ1, φ2)`, angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenmodeOrientation {
    alpha: f64,
    phi1: f64,
    phi2: f64,
}

impl EigenmodeOrientation {
    pub fn new(alpha: f64, phi1: f64, phi2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
            return Err(Error::InvalidOrientation(alpha));
        }
        if !phi1.is_finite() || !phi2.is_finite() {
            return Err(Error::InvalidConfig("orientation angles must be finite".into()));
        }
        Ok(Self { alpha, phi1, phi2 })
    }

    pub fn from_degrees(alpha: f64, phi1_deg: f64, phi2_deg: f64) -> Result<Self> {
        Self::new(alpha, phi1_deg.to_radians(), phi2_deg.to_radians())
    }

    /// Eigenmodes along H and V.
    pub fn linear() -> Self {
        Self {
            alpha: 1.0,
            phi1: 0.0,
            phi2: 0.0,
        }
    }

    /// Eigenmodes coincide with the atomic circular basis (`R_CL = R_AL`).
    pub fn circular() -> Self {
        Self {
            alpha: FRAC_1_SQRT_2,
            phi1: 0.0,
            phi2: FRAC_PI_2,
        }
    }

    /// Elliptical eigenmodes measured by transmission polarimetry.
    pub fn measured() -> Self {
        Self {
            alpha: 0.888,
            phi1: 115.1_f64.to_radians(),
            phi2: (-40.1_f64).to_radians(),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn phi1(&self) -> f64 {
        self.phi1
    }

    pub fn phi2(&self) -> f64 {
        self.phi2
    }
}

fn su2(alpha: f64, phi1: f64, phi2: f64) -> Matrix2<C64> {
    let beta = (1.0 - alpha * alpha).max(0.0).sqrt();
    Matrix2::new(
        C64::from_polar(alpha, phi1),
        -C64::from_polar(beta, -phi2),
        C64::from_polar(beta, phi2),
        C64::from_polar(alpha, -phi1),
    )
}

/// The general SU(2) basis map for an orientation.
pub fn rotation_matrix(o: &EigenmodeOrientation, from: Basis, to: Basis) -> JonesMatrix {
    JonesMatrix {
        entries: su2(o.alpha, o.phi1, o.phi2),
        from,
        to,
    }
}

/// `R_CL`: cavity eigenmodes expressed in the lab basis.
pub fn cavity_to_lab(o: &EigenmodeOrientation) -> JonesMatrix {
    rotation_matrix(o, Basis::Cavity, Basis::Lab)
}

/// `R_AL = (1/√2) [[1, i], [i, 1]]`.
pub fn atomic_to_lab() -> JonesMatrix {
    JonesMatrix {
        entries: su2(FRAC_1_SQRT_2, 0.0, FRAC_PI_2),
        from: Basis::Atomic,
        to: Basis::Lab,
    }
}

/// `R_AC = R_LC · R_AL`.
pub fn atomic_to_cavity_rotation(cavity_orientation: &EigenmodeOrientation) -> JonesMatrix {
    JonesMatrix {
        entries: cavity_to_lab(cavity_orientation).entries.adjoint() * atomic_to_lab().entries,
        from: Basis::Atomic,
        to: Basis::Cavity,
    }
}

/// Coefficients `(c_X, c_Y)` with `a_pol† = c_X a_X† + c_Y a_Y†`.
pub fn map_creation_operator(pol: AtomicPolarization, rot: &JonesMatrix) -> Result<(C64, C64)> {
    if rot.from != Basis::Atomic || rot.to != Basis::Cavity {
        return Err(Error::InvalidState(format!(
            "expected an atomic→cavity map, got {}→{}",
            rot.from, rot.to
        )));
    }
    let err = rot.unitarity_error();
    if err > UNITARITY_TOLERANCE * 10.0 {
        return Err(Error::NonUnitary(err));
    }
    let col = rot.entries.column(pol.index());
    Ok((col[0], col[1]))
}

fn real_rotation(phi: f64) -> Matrix2<C64> {
    let (s, c) = phi.sin_cos();
    Matrix2::new(
        C64::new(c, 0.0),
        C64::new(-s, 0.0),
        C64::new(s, 0.0),
        C64::new(c, 0.0),
    )
}

fn retarder(phi: f64, retardance: C64) -> JonesMatrix {
    let r = real_rotation(phi);
    JonesMatrix {
        entries: r * Matrix2::new(ONE, ZERO, ZERO, retardance) * r.transpose(),
        from: Basis::Lab,
        to: Basis::Lab,
    }
}

/// Quarter-wave plate with its fast axis at `angle_phi` radians from H.
pub fn quarter_wave_plate(angle_phi: f64) -> JonesMatrix {
    retarder(angle_phi, I)
}

pub fn half_wave_plate(angle_phi: f64) -> JonesMatrix {
    retarder(angle_phi, -ONE)
}

/// Projectors onto the transmitted (H) and reflected (V) PBS ports.
///
/// Projectors are not unitary, so these are returned as raw matrices.
pub fn pbs_projectors() -> (Matrix2<C64>, Matrix2<C64>) {
    (
        Matrix2::new(ONE, ZERO, ZERO, ZERO),
        Matrix2::new(ZERO, ZERO, ZERO, ONE),
    )
}

/// Lab-frame polarisations detected at the two PBS ports behind a QWP at
/// `angle_phi`: the port vectors propagated back through the plate.
pub fn analyzer_modes(angle_phi: f64) -> (JonesVector, JonesVector) {
    let back = quarter_wave_plate(angle_phi).adjoint();
    let h = back.apply(&JonesVector::horizontal()).expect("lab basis");
    let v = back.apply(&JonesVector::vertical()).expect("lab basis");
    (h, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn max_abs(m: &Matrix2<C64>) -> f64 {
        m.iter().fold(0.0_f64, |a, z| a.max(z.norm()))
    }

    #[test]
    fn identity_orientation() {
        let r = rotation_matrix(&EigenmodeOrientation::linear(), Basis::Cavity, Basis::Lab);
        assert!(max_abs(&(r.entries - Matrix2::identity())) < 1e-15);
    }

    #[test]
    fn circular_orientation_reproduces_atomic_to_lab() {
        let r = cavity_to_lab(&EigenmodeOrientation::circular());
        let s = C64::new(FRAC_1_SQRT_2, 0.0);
        let expected = Matrix2::new(s, s * I, s * I, s);
        assert!(max_abs(&(r.entries - expected)) < 1e-15);
        assert!(max_abs(&(atomic_to_lab().entries - expected)) < 1e-15);
    }

    #[test]
    fn measured_orientation_matches_quoted_eigenmode() {
        let x = cavity_to_lab(&EigenmodeOrientation::measured())
            .apply(&JonesVector::first(Basis::Cavity))
            .unwrap()
            .phase_normalized();
        let c = x.components();
        assert_relative_eq!(c[0].re, 0.888, epsilon = 1e-12);
        assert!(c[0].im.abs() < 1e-12);
        assert_relative_eq!(c[1].norm(), (1.0f64 - 0.888 * 0.888).sqrt(), epsilon = 1e-12);
        // quoted to three digits, truncated from 0.4598
        assert_relative_eq!(c[1].norm(), 0.459, epsilon = 1e-3);
        assert_relative_eq!(c[1].arg(), -2.709, epsilon = 5e-4);
    }

    #[test]
    fn orientation_rejects_bad_alpha() {
        assert!(matches!(
            EigenmodeOrientation::new(1.2, 0.0, 0.0),
            Err(Error::InvalidOrientation(_))
        ));
        assert!(EigenmodeOrientation::new(-0.1, 0.0, 0.0).is_err());
        assert!(EigenmodeOrientation::new(0.5, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn atomic_plus_maps_back_to_lab_circular() {
        for o in [
            EigenmodeOrientation::measured(),
            EigenmodeOrientation::linear(),
            EigenmodeOrientation::circular(),
        ] {
            let rac = atomic_to_cavity_rotation(&o);
            let lab = rac
                .then(&cavity_to_lab(&o))
                .unwrap()
                .apply(&JonesVector::first(Basis::Atomic))
                .unwrap();
            assert!(lab.same_state(&JonesVector::circular_plus(), 1e-12));
        }
    }

    #[test]
    fn aligned_cavity_gives_identity_rotation() {
        let rac = atomic_to_cavity_rotation(&EigenmodeOrientation::circular());
        let id = JonesMatrix {
            entries: Matrix2::identity(),
            from: Basis::Atomic,
            to: Basis::Cavity,
        };
        assert!(rac.distance_up_to_phase(&id) < 1e-12);
        let (cx, cy) = map_creation_operator(AtomicPolarization::Plus, &rac).unwrap();
        assert_relative_eq!(cx.norm(), 1.0, epsilon = 1e-12);
        assert!(cy.norm() < 1e-12);
    }

    #[test]
    fn linear_cavity_ladder_mapping() {
        let rac = atomic_to_cavity_rotation(&EigenmodeOrientation::linear());
        let (cx, cy) = map_creation_operator(AtomicPolarization::Plus, &rac).unwrap();
        assert!((cx - C64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((cy - C64::new(0.0, FRAC_1_SQRT_2)).norm() < 1e-15);
        // a_-† = (a_X† − i a_Y†)/√2 up to a global phase
        let (mx, my) = map_creation_operator(AtomicPolarization::Minus, &rac).unwrap();
        let v = JonesVector::new(mx, my, Basis::Cavity).unwrap();
        let want = JonesVector::new(ONE, -I, Basis::Cavity).unwrap();
        assert!(v.same_state(&want, 1e-12));
    }

    #[test]
    fn measured_minus_coefficients_match_direct_product() {
        let o = EigenmodeOrientation::measured();
        let rac = atomic_to_cavity_rotation(&o);
        let (cx, cy) = map_creation_operator(AtomicPolarization::Minus, &rac).unwrap();
        // oracle: explicit 2×2 products, written out by hand
        let (a, p1, p2) = (0.888_f64, 115.1_f64.to_radians(), (-40.1_f64).to_radians());
        let b = (1.0 - a * a).sqrt();
        let rcl = [
            [C64::from_polar(a, p1), -C64::from_polar(b, -p2)],
            [C64::from_polar(b, p2), C64::from_polar(a, -p1)],
        ];
        let s = FRAC_1_SQRT_2;
        let ral = [[C64::new(s, 0.0), C64::new(0.0, s)], [C64::new(0.0, s), C64::new(s, 0.0)]];
        // R_LC = R_CL†; column 1 of R_LC·R_AL is R_LC·(i s, s)ᵀ
        let col = [ral[0][1], ral[1][1]];
        let want_x = rcl[0][0].conj() * col[0] + rcl[1][0].conj() * col[1];
        let want_y = rcl[0][1].conj() * col[0] + rcl[1][1].conj() * col[1];
        assert!((cx - want_x).norm() < 1e-14);
        assert!((cy - want_y).norm() < 1e-14);
    }

    #[test]
    fn map_creation_requires_atomic_to_cavity() {
        let r = cavity_to_lab(&EigenmodeOrientation::linear());
        assert!(map_creation_operator(AtomicPolarization::Plus, &r).is_err());
        let bad = JonesMatrix {
            entries: Matrix2::new(ONE, ONE, ZERO, ONE),
            from: Basis::Atomic,
            to: Basis::Cavity,
        };
        assert!(matches!(
            map_creation_operator(AtomicPolarization::Plus, &bad),
            Err(Error::NonUnitary(_))
        ));
    }

    #[test]
    fn round_trips() {
        let o = EigenmodeOrientation::measured();
        let rac = atomic_to_cavity_rotation(&o);
        let back = rac.then(&rac.adjoint()).unwrap();
        assert!(max_abs(&(back.entries - Matrix2::identity())) < 1e-12);
        let rcl = cavity_to_lab(&o);
        let back = rcl.then(&rcl.adjoint()).unwrap();
        assert!(max_abs(&(back.entries - Matrix2::identity())) < 1e-12);
    }

    #[test]
    fn qwp_examples() {
        let q0 = quarter_wave_plate(0.0);
        let h = q0.apply(&JonesVector::horizontal()).unwrap();
        assert!(h.same_state(&JonesVector::horizontal(), 1e-15));

        // circular → linear at 45°, so one PBS port takes everything
        let q45 = quarter_wave_plate(45f64.to_radians());
        let out = q45.apply(&JonesVector::circular_plus()).unwrap().components();
        let (ph, pv) = pbs_projectors();
        let th = (ph * out).norm_squared();
        let tv = (pv * out).norm_squared();
        assert!(th.min(tv) < 1e-15);
        assert_relative_eq!(th.max(tv), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn qwp_squared_is_hwp() {
        for deg in [-80.0, -22.5, 0.0, 13.0, 45.0, 100.0] {
            let phi = f64::to_radians(deg);
            let q = quarter_wave_plate(phi);
            let qq = q.then(&q).unwrap();
            assert!(max_abs(&(qq.entries - half_wave_plate(phi).entries)) < 1e-15);
        }
    }

    #[test]
    fn pbs_examples() {
        let (ph, pv) = pbs_projectors();
        let h = JonesVector::horizontal().components();
        let v = JonesVector::vertical().components();
        assert_eq!(ph * h, h);
        assert!((ph * v).norm() == 0.0);
        assert_eq!(ph + pv, Matrix2::identity());
        assert_eq!(ph * pv, Matrix2::zeros());
    }

    #[test]
    fn analyzer_modes_are_orthonormal() {
        let (a, b) = analyzer_modes(0.3);
        assert!(a.inner(&b).unwrap().norm() < 1e-15);
        assert_relative_eq!(a.inner(&a).unwrap().re, 1.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn rotations_are_unitary(alpha in 0.0f64..=1.0, p1 in -10.0f64..10.0, p2 in -10.0f64..10.0) {
            let o = EigenmodeOrientation::new(alpha, p1, p2).unwrap();
            let r = cavity_to_lab(&o);
            prop_assert!(r.unitarity_error() < UNITARITY_TOLERANCE);
            prop_assert!((r.determinant().norm() - 1.0).abs() < 1e-12);
            let rac = atomic_to_cavity_rotation(&o);
            prop_assert!(rac.unitarity_error() < UNITARITY_TOLERANCE);
            for pol in [AtomicPolarization::Plus, AtomicPolarization::Minus] {
                let (cx, cy) = map_creation_operator(pol, &rac).unwrap();
                prop_assert!((cx.norm_sqr() + cy.norm_sqr() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn qwp_is_unitary_and_periodic(phi in -10.0f64..10.0) {
            let q = quarter_wave_plate(phi);
            prop_assert!(q.unitarity_error() < UNITARITY_TOLERANCE);
            let shifted = quarter_wave_plate(phi + std::f64::consts::PI);
            prop_assert!(max_abs(&(q.entries - shifted.entries)) < 1e-14);
        }

        #[test]
        fn pbs_completeness(re0 in -1.0f64..1.0, im0 in -1.0f64..1.0, re1 in -1.0f64..1.0, im1 in -1.0f64..1.0) {
            prop_assume!(re0.abs() + im0.abs() + re1.abs() + im1.abs() > 1e-3);
            let psi = JonesVector::new(C64::new(re0, im0), C64::new(re1, im1), Basis::Lab).unwrap().components();
            let (ph, pv) = pbs_projectors();
            let total = psi.dotc(&(ph * psi)).re + psi.dotc(&(pv * psi)).re;
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
