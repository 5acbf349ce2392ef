//! Emitter level schemes: the ideal Λ-system and the ⁸⁷Rb D₂ F=1 → F′=0,1 model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::MHZ;
use crate::polarization::AtomicPolarization;
use crate::quantum::{factor_outer, HilbertSpace, Operator, ATOM, C64};


/// Ground-state Zeeman splitting between m_F = ±1.
pub const DEFAULT_ZEEMAN_SPLITTING: f64 = 26.0 * MHZ;
/// Raman resonance above the zero-field F=1,m=0 → F′=1,m′=0 line.
pub const DEFAULT_RAMAN_OFFSET: f64 = 7.5 * MHZ;
/// F′=0 lies this far below F′=1 (zero field).
pub const F0_HYPERFINE_OFFSET: f64 = -72.218 * MHZ;
/// Landé factor ratio g_F(F′=1) / g_F(F=1) = (2/3) / (−1/2).
pub const EXCITED_TO_GROUND_LANDE_RATIO: f64 = -4.0 / 3.0;
/// Fraction of F′=1 decay that ends in F=2.
pub const DEFAULT_DARK_BRANCHING: f64 = 1.0 / 6.0;

pub const DARK: &str = "dark";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelKind {
    Ground,
    Excited,
    Dark,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomicLevel {
    pub label: String,
    /// Angular frequency relative to the scheme's energy zero.
    pub energy: f64,
    pub spin: Option<i32>,
    pub kind: LevelKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionPolarization {
    SigmaPlus,
    SigmaMinus,
    Pi,
}

impl TransitionPolarization {
    pub fn from_delta_m(q: i32) -> Option<Self> {
        match q {
            1 => Some(Self::SigmaPlus),
            -1 => Some(Self::SigmaMinus),
            0 => Some(Self::Pi),
            _ => None,
        }
    }

    /// The cavity photon mode coupling this transition, if any.
    pub fn cavity_mode(self) -> Option<AtomicPolarization> {
        match self {
            Self::SigmaPlus => Some(AtomicPolarization::Plus),
            Self::SigmaMinus => Some(AtomicPolarization::Minus),
            Self::Pi => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drive {
    Pump,
    Cavity,
    PumpAndCavity,
    None,
}

impl Drive {
    pub fn pump(self) -> bool {
        matches!(self, Drive::Pump | Drive::PumpAndCavity)
    }

    pub fn cavity(self) -> bool {
        matches!(self, Drive::Cavity | Drive::PumpAndCavity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transition {
    pub ground: String,
    pub excited: String,
    pub polarization: TransitionPolarization,
    /// Angular (Clebsch–Gordan magnitude) factor, 0..=1.
    pub relative_strength: f64,
    pub driven_by: Drive,
}

/// Spontaneous decay `excited → ground` at amplitude rate `rate` (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayChannel {
    pub excited: String,
    pub ground: String,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelScheme {
    name: String,
    levels: Vec<AtomicLevel>,
    transitions: Vec<Transition>,
    decays: Vec<DecayChannel>,
    dark_state: Option<String>,
    initial_level: String,
    final_level: String,
    /// Photon frequency, in the scheme's frame, at which the cavity is Raman
    /// resonant with the pump for the initial → final transfer.
    raman_photon_frequency: f64,
    /// Transition strength that the quoted coupling rate `g` refers to.
    cavity_reference_strength: f64,
    /// Amplitude linewidth budget per excited level.
    linewidth: f64,
}

impl LevelScheme {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn levels(&self) -> &[AtomicLevel] {
        &self.levels
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn decays(&self) -> &[DecayChannel] {
        &self.decays
    }

    pub fn dark_state(&self) -> Option<&str> {
        self.dark_state.as_deref()
    }

    pub fn initial_level(&self) -> &str {
        &self.initial_level
    }

    pub fn final_level(&self) -> &str {
        &self.final_level
    }

    pub fn raman_photon_frequency(&self) -> f64 {
        self.raman_photon_frequency
    }

    pub fn cavity_reference_strength(&self) -> f64 {
        self.cavity_reference_strength
    }

    /// Amplitude decay budget γ each excited level was built with.
    pub fn linewidth(&self) -> f64 {
        self.linewidth
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.levels
            .iter()
            .position(|l| l.label == label)
            .ok_or_else(|| Error::UnknownLevel(label.to_string()))
    }

    pub fn level(&self, label: &str) -> Result<&AtomicLevel> {
        Ok(&self.levels[self.index_of(label)?])
    }

    pub fn energy(&self, label: &str) -> Result<f64> {
        Ok(self.level(label)?.energy)
    }

    /// Pump frequency that is two-photon resonant with the cavity photon
    /// at [`raman_photon_frequency`](Self::raman_photon_frequency).
    pub fn raman_pump_frequency(&self) -> f64 {
        let ei = self.levels[self.index_of(&self.initial_level).unwrap()].energy;
        let ef = self.levels[self.index_of(&self.final_level).unwrap()].energy;
        self.raman_photon_frequency + ef - ei
    }

    /// Overwrites level energies; unknown labels are rejected.
    pub fn with_energy_overrides(mut self, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        for (label, &energy) in overrides {
            if !energy.is_finite() {
                return Err(Error::InvalidScheme(format!("energy of `{label}` is not finite")));
            }
            let i = self.index_of(label)?;
            self.levels[i].energy = energy;
        }
        Ok(self)
    }

    pub fn with_initial_level(mut self, label: &str) -> Result<Self> {
        self.index_of(label)?;
        self.initial_level = label.to_string();
        Ok(self)
    }

    /// Total amplitude decay rate out of `excited`.
    pub fn total_decay(&self, excited: &str) -> f64 {
        self.decays
            .iter()
            .filter(|d| d.excited == excited)
            .map(|d| d.rate)
            .sum()
    }

    pub fn find_transition(&self, ground: &str, excited: &str) -> Result<&Transition> {
        self.transitions
            .iter()
            .find(|t| t.ground == ground && t.excited == excited)
            .ok_or_else(|| Error::UnknownTransition {
                ground: ground.to_string(),
                excited: excited.to_string(),
            })
    }

    pub fn validate(&self) -> Result<()> {
        for (i, l) in self.levels.iter().enumerate() {
            if self.levels[..i].iter().any(|m| m.label == l.label) {
                return Err(Error::InvalidScheme(format!("duplicate level `{}`", l.label)));
            }
            if !l.energy.is_finite() {
                return Err(Error::InvalidScheme(format!("`{}` has non-finite energy", l.label)));
            }
        }
        let dark = self.dark_state.as_deref();
        for t in &self.transitions {
            let g = self.level(&t.ground)?;
            let e = self.level(&t.excited)?;
            if Some(g.label.as_str()) == dark || Some(e.label.as_str()) == dark {
                return Err(Error::InvalidScheme("dark state may not be coupled".into()));
            }
            if !(0.0..=1.0).contains(&t.relative_strength) {
                return Err(Error::InvalidScheme(format!(
                    "strength {} of {}→{} outside [0, 1]",
                    t.relative_strength, t.ground, t.excited
                )));
            }
            if t.polarization == TransitionPolarization::Pi && t.driven_by.cavity() {
                return Err(Error::InvalidScheme("π transitions cannot couple to the cavity".into()));
            }
        }
        for d in &self.decays {
            self.level(&d.excited)?;
            self.level(&d.ground)?;
            if Some(d.excited.as_str()) == dark {
                return Err(Error::InvalidScheme("dark state cannot decay".into()));
            }
            if d.rate < 0.0 || !d.rate.is_finite() {
                return Err(Error::InvalidScheme(format!("negative decay rate {}", d.rate)));
            }
        }
        for l in self.levels.iter().filter(|l| l.kind == LevelKind::Excited) {
            let total = self.total_decay(&l.label);
            if total > self.linewidth * (1.0 + 1e-12) + 1e-9 {
                return Err(Error::InvalidScheme(format!(
                    "decay out of `{}` ({total}) exceeds the linewidth budget {}",
                    l.label, self.linewidth
                )));
            }
        }
        self.index_of(&self.initial_level)?;
        self.index_of(&self.final_level)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeLevelOptions {
    /// Common detuning of pump and cavity from their transitions (rad/s).
    pub one_photon_detuning: f64,
    /// Atomic amplitude decay rate γ (rad/s).
    pub gamma: f64,
}

impl Default for ThreeLevelOptions {
    fn default() -> Self {
        Self {
            one_photon_detuning: 0.0,
            gamma: 0.0,
        }
    }
}

/// The Λ-system `u− ↔ e0 ↔ u+`: the pump drives `u− → e0` and the cavity
/// collects σ⁻ photons on `e0 → u+`.
pub fn three_level_lambda(opts: ThreeLevelOptions) -> Result<LevelScheme> {
    let level = |label: &str, spin, kind| AtomicLevel {
        label: label.into(),
        energy: 0.0,
        spin: Some(spin),
        kind,
    };
    let levels = vec![
        level("u-", -1, LevelKind::Ground),
        level("u+", 1, LevelKind::Ground),
        level("e0", 0, LevelKind::Excited),
    ];
    let transitions = vec![
        Transition {
            ground: "u-".into(),
            excited: "e0".into(),
            polarization: TransitionPolarization::SigmaPlus,
            relative_strength: 1.0,
            driven_by: Drive::Pump,
        },
        Transition {
            ground: "u+".into(),
            excited: "e0".into(),
            polarization: TransitionPolarization::SigmaMinus,
            relative_strength: 1.0,
            driven_by: Drive::Cavity,
        },
    ];
    if opts.gamma < 0.0 || !opts.gamma.is_finite() {
        return Err(Error::InvalidScheme("gamma must be non-negative".into()));
    }
    let decays = if opts.gamma > 0.0 {
        ["u-", "u+"]
            .iter()
            .map(|g| DecayChannel {
                excited: "e0".into(),
                ground: (*g).into(),
                rate: opts.gamma / 2.0,
            })
            .collect()
    } else {
        Vec::new()
    };
    let scheme = LevelScheme {
        name: "three_level".into(),
        levels,
        transitions,
        decays,
        dark_state: None,
        initial_level: "u-".into(),
        final_level: "u+".into(),
        raman_photon_frequency: -opts.one_photon_detuning,
        cavity_reference_strength: 1.0,
        linewidth: opts.gamma,
    };
    scheme.validate()?;
    Ok(scheme)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rb87Options {
    /// Splitting between F=1, m_F = ±1 (rad/s).
    pub zeeman_ground_splitting: f64,
    /// Energy overrides by level label (rad/s), replacing the linear-Zeeman defaults.
    pub excited_shifts: BTreeMap<String, f64>,
    /// Raman resonance above the zero-field m=0 → m′=0 line (rad/s).
    pub raman_offset: f64,
    /// Atomic amplitude decay rate γ (rad/s).
    pub gamma: f64,
    /// Fraction of F′=1 decay into the aggregate dark F=2 level.
    pub dark_branching: f64,
    /// Photon the Raman transfer emits; picks the initial/final sublevels.
    pub photon: AtomicPolarization,
}

impl Default for Rb87Options {
    fn default() -> Self {
        Self {
            zeeman_ground_splitting: DEFAULT_ZEEMAN_SPLITTING,
            excited_shifts: BTreeMap::new(),
            raman_offset: DEFAULT_RAMAN_OFFSET,
            gamma: 3.03 * MHZ,
            dark_branching: DEFAULT_DARK_BRANCHING,
            photon: AtomicPolarization::Minus,
        }
    }
}

pub fn ground_label(m: i32) -> String {
    format!("F=1,mF={m:+}").replace("+0", "0")
}

pub fn excited_label(f: i32, m: i32) -> String {
    format!("F'={f},mF={m:+}").replace("+0", "0")
}

/// Relative hyperfine strength factors |c|² for F=1,m → F′,m′ on the D₂
/// line, in units of the reduced J=1/2 → J′=3/2 dipole element squared.
/// Each ground sublevel sums to 1 over the full F′ = 0..3 manifold.
pub fn d2_strength_factor(m: i32, f_exc: i32, m_exc: i32) -> f64 {
    match (f_exc, m, m_exc) {
        (1, -1, 0) | (1, 0, 1) | (1, 1, 0) | (1, 0, -1) => 5.0 / 24.0,
        (1, -1, -1) | (1, 1, 1) => 5.0 / 24.0,
        (1, 0, 0) => 0.0,
        (0, -1, 0) | (0, 1, 0) | (0, 0, 0) => 1.0 / 6.0,
        _ => 0.0,
    }
}

/// F=1 ground and F′=0,1 excited manifolds of the ⁸⁷Rb D₂ line with all
/// magnetic sublevels and an aggregate dark level standing in for F=2.
pub fn rb87_d2_scheme(opts: &Rb87Options) -> Result<LevelScheme> {
    if opts.zeeman_ground_splitting < 0.0 || !opts.zeeman_ground_splitting.is_finite() {
        return Err(Error::InvalidScheme("Zeeman splitting must be non-negative".into()));
    }
    if !(0.0..=1.0).contains(&opts.dark_branching) {
        return Err(Error::InvalidScheme("dark branching must lie in [0, 1]".into()));
    }
    if opts.gamma < 0.0 || !opts.gamma.is_finite() {
        return Err(Error::InvalidScheme("gamma must be non-negative".into()));
    }
    let per_m = opts.zeeman_ground_splitting / 2.0;
    let mut levels = Vec::with_capacity(8);
    for m in -1..=1 {
        levels.push(AtomicLevel {
            label: ground_label(m),
            energy: per_m * m as f64,
            spin: Some(m),
            kind: LevelKind::Ground,
        });
    }
    levels.push(AtomicLevel {
        label: DARK.into(),
        energy: 0.0,
        spin: None,
        kind: LevelKind::Dark,
    });
    levels.push(AtomicLevel {
        label: excited_label(0, 0),
        energy: F0_HYPERFINE_OFFSET,
        spin: Some(0),
        kind: LevelKind::Excited,
    });
    for m in -1..=1 {
        levels.push(AtomicLevel {
            label: excited_label(1, m),
            energy: EXCITED_TO_GROUND_LANDE_RATIO * per_m * m as f64,
            spin: Some(m),
            kind: LevelKind::Excited,
        });
    }

    let excited: Vec<(i32, i32)> = vec![(0, 0), (1, -1), (1, 0), (1, 1)];
    let mut transitions = Vec::new();
    let mut decays = Vec::new();
    for &(f, me) in &excited {
        let to_f1: f64 = (-1..=1).map(|m| d2_strength_factor(m, f, me)).sum();
        let branching = if f == 1 { opts.dark_branching } else { 0.0 };
        for m in -1..=1 {
            let factor = d2_strength_factor(m, f, me);
            if factor == 0.0 {
                continue;
            }
            let polarization = TransitionPolarization::from_delta_m(me - m).expect("|Δm| ≤ 1");
            transitions.push(Transition {
                ground: ground_label(m),
                excited: excited_label(f, me),
                polarization,
                relative_strength: factor.sqrt(),
                driven_by: if polarization == TransitionPolarization::Pi {
                    Drive::None
                } else {
                    Drive::PumpAndCavity
                },
            });
            if opts.gamma > 0.0 {
                decays.push(DecayChannel {
                    excited: excited_label(f, me),
                    ground: ground_label(m),
                    rate: opts.gamma * (1.0 - branching) * factor / to_f1,
                });
            }
        }
        if opts.gamma > 0.0 && branching > 0.0 {
            decays.push(DecayChannel {
                excited: excited_label(f, me),
                ground: DARK.into(),
                rate: opts.gamma * branching,
            });
        }
    }

    let (initial, final_) = match opts.photon {
        AtomicPolarization::Minus => (ground_label(-1), ground_label(1)),
        AtomicPolarization::Plus => (ground_label(1), ground_label(-1)),
    };
    let scheme = LevelScheme {
        name: "rb87_d2".into(),
        levels,
        transitions,
        decays,
        dark_state: Some(DARK.into()),
        initial_level: initial,
        final_level: final_,
        raman_photon_frequency: opts.raman_offset,
        cavity_reference_strength: d2_strength_factor(-1, 1, 0).sqrt(),
        linewidth: opts.gamma,
    }
    .with_energy_overrides(&opts.excited_shifts)?;
    scheme.validate()?;
    Ok(scheme)
}

/// `strength · |e⟩⟨g|` on the atom factor of `space`.
pub fn transition_operator(scheme: &LevelScheme, t: &Transition, space: &HilbertSpace) -> Result<Operator> {
    let found = scheme.find_transition(&t.ground, &t.excited)?;
    check_atom_dim(scheme, space)?;
    let g = scheme.index_of(&found.ground)?;
    let e = scheme.index_of(&found.excited)?;
    Ok(factor_outer(space, ATOM, e, g)?.scale(C64::new(found.relative_strength, 0.0)))
}

/// `|ground⟩⟨excited|` on the atom factor.
pub fn lowering_projector(scheme: &LevelScheme, excited: &str, ground: &str, space: &HilbertSpace) -> Result<Operator> {
    check_atom_dim(scheme, space)?;
    factor_outer(space, ATOM, scheme.index_of(ground)?, scheme.index_of(excited)?)
}

pub fn level_projector(scheme: &LevelScheme, label: &str, space: &HilbertSpace) -> Result<Operator> {
    check_atom_dim(scheme, space)?;
    let i = scheme.index_of(label)?;
    factor_outer(space, ATOM, i, i)
}

fn check_atom_dim(scheme: &LevelScheme, space: &HilbertSpace) -> Result<()> {
    let dim = space.dim_of(ATOM)?;
    if dim != scheme.len() {
        return Err(Error::DimensionMismatch {
            expected: scheme.len(),
            found: dim,
        });
    }
    Ok(())
}
