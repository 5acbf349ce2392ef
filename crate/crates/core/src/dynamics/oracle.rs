//! Independent reference: exact exponential of the Liouvillian superoperator.
//!
//! Column-stacking convention: `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quantum::{DensityMatrix, HilbertSpace, Operator, C64};

use super::config::{PulseShape, SystemConfig};
use super::hamiltonian::Model;

/// A time-independent Hamiltonian with a fixed collapse set.
#[derive(Debug, Clone)]
pub struct ConstantSystem {
    pub hamiltonian: Operator,
    pub collapse: Vec<Operator>,
}

impl ConstantSystem {
    pub fn new(hamiltonian: Operator, collapse: Vec<Operator>) -> Result<Self> {
        if collapse.iter().any(|c| c.space() != hamiltonian.space()) {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self { hamiltonian, collapse })
    }

    pub fn space(&self) -> &HilbertSpace {
        self.hamiltonian.space()
    }

    /// Rotating-frame system of `cfg`, valid on `[0, T]`. Fails unless every
    /// rotating-frame coupling is static and the pump is constant or off.
    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        let model = Model::new(cfg)?;
        let pumped = cfg.pulse.peak_rabi != 0.0;
        if pumped && cfg.pulse.shape != PulseShape::Constant {
            return Err(Error::TimeDependent("shaped pump pulse".into()));
        }
        let generator = model.generator();
        if !generator.is_static(pumped) {
            return Err(Error::TimeDependent("rotating-frame couplings oscillate".into()));
        }
        let h = Operator::new(model.space().clone(), generator.hamiltonian(0.0))?;
        Self::new(h, model.collapse_operators().to_vec())
    }
}

/// Superoperator `L` with `vec(dρ/dt) = L vec(ρ)`.
pub fn liouvillian(h: &Operator, collapse: &[Operator]) -> Result<DMatrix<C64>> {
    if collapse.iter().any(|c| c.space() != h.space()) {
        return Err(Error::SpaceMismatch);
    }
    let n = h.dim();
    let id = DMatrix::<C64>::identity(n, n);
    let hm = h.matrix();
    let mi = C64::new(0.0, -1.0);
    let mut l = (id.kronecker(hm) - hm.transpose().kronecker(&id)) * mi;
    for c in collapse {
        let cm = c.matrix();
        let cdc = cm.adjoint() * cm;
        l += cm.conjugate().kronecker(cm);
        l -= (id.kronecker(&cdc) + cdc.transpose().kronecker(&id)) * C64::new(0.5, 0.0);
    }
    Ok(l)
}

fn one_norm(m: &DMatrix<C64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest 1-norm of `t·A` per Taylor substep. Cancellation costs at most
/// a factor e^4 in relative accuracy, about two digits.
const SUBSTEP_NORM: f64 = 4.0;

/// `exp(t·A)·v` by scaled Taylor series, truncated at double precision.
pub fn expm_multiply(a: &DMatrix<C64>, v: &DVector<C64>, t: f64) -> DVector<C64> {
    let norm = one_norm(a) * t.abs();
    if norm == 0.0 {
        return v.clone();
    }
    let steps = (norm / SUBSTEP_NORM).ceil().max(1.0) as usize;
    let h = C64::new(t / steps as f64, 0.0);
    let mut out = v.clone();
    for _ in 0..steps {
        let mut term = out.clone();
        let mut acc = out.clone();
        for k in 1..=100 {
            term = (a * &term) * (h / k as f64);
            acc += &term;
            let tn = term.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let an = acc.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if tn <= f64::EPSILON * an * 0.25 {
                break;
            }
        }
        out = acc;
    }
    out
}

pub fn vectorize(rho: &DMatrix<C64>) -> DVector<C64> {
    DVector::from_column_slice(rho.as_slice())
}

pub fn unvectorize(v: &DVector<C64>, n: usize) -> DMatrix<C64> {
    DMatrix::from_column_slice(n, n, v.as_slice())
}

/// `ρ(t) = exp(L t) ρ0`.
pub fn liouvillian_expm_oracle(sys: &ConstantSystem, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if rho0.space() != sys.space() {
        return Err(Error::SpaceMismatch);
    }
    let l = liouvillian(&sys.hamiltonian, &sys.collapse)?;
    let v = expm_multiply(&l, &vectorize(rho0.matrix()), t);
    DensityMatrix::new_unchecked(sys.space().clone(), unvectorize(&v, rho0.space().total_dim()))
}

/// Oracle for a configured run. Only defined where the rotating-frame
/// generator is static, and for a constant pump only up to the pulse end.
pub fn config_expm_oracle(cfg: &SystemConfig, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    let sys = ConstantSystem::from_config(cfg)?;
    if cfg.pulse.peak_rabi != 0.0 && !(0.0..=cfg.pulse.duration).contains(&t) {
        return Err(Error::TimeDependent("constant pump only holds on [0, T]".into()));
    }
    liouvillian_expm_oracle(&sys, rho0, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::annihilation;

    #[test]
    fn taylor_matches_dense_exponential() {
        let space = HilbertSpace::single("mode", 3).unwrap();
        let a = annihilation(3).unwrap();
        let a = Operator::new(space.clone(), a.into_matrix()).unwrap();
        let h = Operator::new(
            space.clone(),
            DMatrix::from_fn(3, 3, |r, c| {
                let x = (r + 2 * c) as f64 * 0.3;
                if r == c {
                    C64::new(x, 0.0)
                } else if r < c {
                    C64::new(x, 0.2 * x)
                } else {
                    C64::new((c + 2 * r) as f64 * 0.3, -0.2 * (c + 2 * r) as f64 * 0.3)
                }
            }),
        )
        .unwrap();
        let l = liouvillian(&h, &[a.scale(C64::new(0.7, 0.0))]).unwrap();
        let rho = DensityMatrix::basis_state(&space, &[2]).unwrap();
        let t = 1.7;
        let dense = (&l * C64::new(t, 0.0)).exp() * vectorize(rho.matrix());
        let taylor = expm_multiply(&l, &vectorize(rho.matrix()), t);
        let diff = (dense - taylor).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn zero_time_is_identity() {
        let space = HilbertSpace::single("mode", 2).unwrap();
        let sys = ConstantSystem::new(Operator::identity(&space), vec![]).unwrap();
        let rho = DensityMatrix::maximally_mixed(&space);
        let out = liouvillian_expm_oracle(&sys, &rho, 0.0).unwrap();
        assert_eq!(out.matrix(), rho.matrix());
    }
}
