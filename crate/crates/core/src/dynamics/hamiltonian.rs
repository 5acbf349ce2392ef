//! Hamiltonian assembly and the rotating-frame transformation.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::atom::{lowering_projector, transition_operator};
use crate::error::{Error, Result};
use crate::polarization::{atomic_to_cavity_rotation, map_creation_operator};
use crate::quantum::{annihilation, embed, HilbertSpace, Operator, C64, CAVITY_X, CAVITY_Y};

use super::config::{pulse_amplitude, SystemConfig};
use super::lindblad::{LindbladGenerator, TimeTerm};

/// The operators of one configured emitter–cavity system.
///
/// `H(t) = H0 + H_C − (Ω(t)/2)(P e^{−iω_L t} + P† e^{iω_L t})`, where `H0`
/// holds the bare atom and cavity energies, `H_C = −g Σ s (|e⟩⟨g| a_k + h.c.)`
/// is the cavity coupling and `P = Σ s |e⟩⟨g|` runs over pumped transitions.
#[derive(Debug, Clone)]
pub struct Model {
    config: SystemConfig,
    space: HilbertSpace,
    bare: Vec<f64>,
    cavity_coupling: Operator,
    pump_raising: Operator,
    laser_frequency: f64,
    a_x: Operator,
    a_y: Operator,
    collapse: Vec<Operator>,
}

impl Model {
    pub fn new(config: &SystemConfig) -> Result<Self> {
        config.validate()?;
        let scheme = &config.scheme;
        let n = config.fock_truncation;
        let space = HilbertSpace::atom_cavity(scheme.len(), n)?;
        let a = annihilation(n)?;
        let a_x = embed(&a, CAVITY_X, &space)?;
        let a_y = embed(&a, CAVITY_Y, &space)?;

        let (wx, wy) = config.mode_frequencies();
        let mut bare = Vec::with_capacity(space.total_dim());
        for flat in 0..space.total_dim() {
            let idx = space.factor_indices(flat);
            bare.push(scheme.levels()[idx[0]].energy + wx * idx[1] as f64 + wy * idx[2] as f64);
        }

        let rot = atomic_to_cavity_rotation(&config.cavity_orientation);
        let mut cavity_coupling = Operator::zeros(&space);
        let mut pump_raising = Operator::zeros(&space);
        let g_scale = config.g / scheme.cavity_reference_strength();
        for t in scheme.transitions() {
            let raise = transition_operator(scheme, t, &space)?;
            if t.driven_by.pump() {
                pump_raising = &pump_raising + &raise;
            }
            if t.driven_by.cavity() {
                let Some(pol) = t.polarization.cavity_mode() else {
                    return Err(Error::InvalidScheme("π transition coupled to the cavity".into()));
                };
                let (cx, cy) = map_creation_operator(pol, &rot)?;
                // a_k = c_X* a_X + c_Y* a_Y
                let a_k = &a_x.scale(cx.conj()) + &a_y.scale(cy.conj());
                let absorb = &raise * &a_k;
                let term = &absorb + &absorb.adjoint();
                cavity_coupling = &cavity_coupling - &term.scale(C64::new(g_scale, 0.0));
            }
        }

        let collapse = collapse_operators_for(config, &space, &a_x, &a_y)?;
        Ok(Self {
            config: config.clone(),
            space,
            bare,
            cavity_coupling,
            pump_raising,
            laser_frequency: config.laser_frequency(),
            a_x,
            a_y,
            collapse,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    /// Diagonal of `H0`.
    pub fn bare_energies(&self) -> &[f64] {
        &self.bare
    }

    pub fn bare_hamiltonian(&self) -> Operator {
        Operator::from_diagonal(&self.space, &self.bare).expect("dimension matches")
    }

    pub fn a_x(&self) -> &Operator {
        &self.a_x
    }

    pub fn a_y(&self) -> &Operator {
        &self.a_y
    }

    pub fn collapse_operators(&self) -> &[Operator] {
        &self.collapse
    }

    pub fn laser_frequency(&self) -> f64 {
        self.laser_frequency
    }

    /// Schrödinger-picture Hamiltonian at time `t` (in the optical reference frame).
    pub fn hamiltonian(&self, t: f64) -> Operator {
        let omega = pulse_amplitude(&self.config.pulse, t);
        let phase = C64::from_polar(1.0, -self.laser_frequency * t);
        let drive = self.pump_raising.scale(phase);
        let drive = &drive + &drive.adjoint();
        let h = &self.bare_hamiltonian() + &self.cavity_coupling;
        &h - &drive.scale(C64::new(omega / 2.0, 0.0))
    }

    /// `H′(t) = U†HU − H0` with `U = exp(−iH0 t)`.
    pub fn rotating_hamiltonian(&self, t: f64) -> Operator {
        let frame = RotatingFrame {
            energies: self.bare.clone(),
        };
        frame.transform(&self.hamiltonian(t), t)
    }

    pub fn frame(&self) -> RotatingFrame {
        RotatingFrame {
            energies: self.bare.clone(),
        }
    }

    /// Sparse time-dependent generator used by the integrator.
    pub fn generator(&self) -> LindbladGenerator {
        let mut terms = Vec::new();
        let push = |terms: &mut Vec<TimeTerm>, m: &DMatrix<C64>, scale: f64, freq_shift: f64, pumped: bool| {
            for col in 0..m.ncols() {
                for row in 0..m.nrows() {
                    let v = m[(row, col)];
                    if v.norm() == 0.0 || row == col {
                        continue;
                    }
                    terms.push(TimeTerm {
                        row,
                        col,
                        value: v * scale,
                        frequency: self.bare[row] - self.bare[col] + freq_shift,
                        pumped,
                    });
                }
            }
        };
        push(&mut terms, self.cavity_coupling.matrix(), 1.0, 0.0, false);
        // −(Ω/2) P e^{−iω_L t} and its conjugate
        push(&mut terms, self.pump_raising.matrix(), -0.5, -self.laser_frequency, true);
        push(
            &mut terms,
            &self.pump_raising.matrix().adjoint(),
            -0.5,
            self.laser_frequency,
            true,
        );
        LindbladGenerator::new(
            self.space.total_dim(),
            terms,
            Some(self.config.pulse),
            &self.collapse,
        )
    }
}

/// `H(cfg, t)`.
pub fn build_hamiltonian(cfg: &SystemConfig, t: f64) -> Result<Operator> {
    Ok(Model::new(cfg)?.hamiltonian(t))
}

/// `{√(2κ) a_X, √(2κ) a_Y} ∪ {√(2γ_eu) |u⟩⟨e|}`.
pub fn collapse_operators(cfg: &SystemConfig) -> Result<Vec<Operator>> {
    Ok(Model::new(cfg)?.collapse)
}

fn collapse_operators_for(
    cfg: &SystemConfig,
    space: &HilbertSpace,
    a_x: &Operator,
    a_y: &Operator,
) -> Result<Vec<Operator>> {
    let k = C64::new((2.0 * cfg.kappa).sqrt(), 0.0);
    let mut out = vec![a_x.scale(k), a_y.scale(k)];
    // merge repeated (excited, ground) pairs
    let mut rates: BTreeMap<(String, String), f64> = BTreeMap::new();
    for d in cfg.scheme.decays() {
        *rates.entry((d.excited.clone(), d.ground.clone())).or_default() += d.rate;
    }
    for ((e, g), rate) in rates {
        if rate > 0.0 {
            let op = lowering_projector(&cfg.scheme, &e, &g, space)?;
            out.push(op.scale(C64::new((2.0 * rate).sqrt(), 0.0)));
        }
    }
    Ok(out)
}

/// Interaction picture with respect to a diagonal `H0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatingFrame {
    energies: Vec<f64>,
}

impl RotatingFrame {
    pub fn new(h0: &Operator) -> Result<Self> {
        if !h0.is_diagonal() {
            return Err(Error::NonDiagonal);
        }
        let m = h0.matrix();
        if (0..h0.dim()).any(|i| m[(i, i)].im != 0.0) {
            return Err(Error::InvalidState("bare Hamiltonian has complex energies".into()));
        }
        Ok(Self {
            energies: (0..h0.dim()).map(|i| m[(i, i)].re).collect(),
        })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// `U†(t) op U(t)` with `U = exp(−iH0 t)`: entry (m, n) gains `e^{i(E_m − E_n)t}`.
    pub fn rotate(&self, op: &Operator, t: f64) -> Operator {
        let m = op.matrix();
        let out = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| {
            m[(r, c)] * C64::from_polar(1.0, (self.energies[r] - self.energies[c]) * t)
        });
        Operator::new(op.space().clone(), out).expect("same shape")
    }

    /// `U†HU − H0`.
    pub fn transform(&self, h: &Operator, t: f64) -> Operator {
        let rotated = self.rotate(h, t);
        let mut m = rotated.into_matrix();
        for (i, e) in self.energies.iter().enumerate() {
            m[(i, i)] -= C64::new(*e, 0.0);
        }
        Operator::new(h.space().clone(), m).expect("same shape")
    }
}

/// Wraps a Hamiltonian family into its rotating-frame counterpart about `H0`.
pub fn to_rotating_frame<F>(h: F, h0: &Operator) -> Result<impl Fn(f64) -> Operator>
where
    F: Fn(f64) -> Operator,
{
    let frame = RotatingFrame::new(h0)?;
    Ok(move |t| frame.transform(&h(t), t))
}

pub fn frame_rotate_operator(op: &Operator, h0: &Operator, t: f64) -> Result<Operator> {
    if op.space() != h0.space() {
        return Err(Error::SpaceMismatch);
    }
    Ok(RotatingFrame::new(h0)?.rotate(op, t))
}
