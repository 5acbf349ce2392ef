//! Master-equation right-hand side.
//!
//! `dρ/dt = −i[H′, ρ] + Σ_n (C_n ρ C_n† − ½{C_n†C_n, ρ})`
//!
//! With `C = √(2κ) a` this decays the intracavity photon number at `2κ`,
//! i.e. κ is the field decay rate and the intensity FWHM is `2κ`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quantum::{DensityMatrix, Operator, C64};

use super::config::{pulse_amplitude, PulseProfile};

/// Dense reference implementation.
pub fn lindblad_rhs(rho: &DensityMatrix, h: &Operator, collapse: &[Operator]) -> Result<Operator> {
    if h.space() != rho.space() || collapse.iter().any(|c| c.space() != rho.space()) {
        return Err(Error::SpaceMismatch);
    }
    let r = rho.matrix();
    let hm = h.matrix();
    let mi = C64::new(0.0, -1.0);
    let mut out = (hm * r - r * hm) * mi;
    for c in collapse {
        let cm = c.matrix();
        let cd = cm.adjoint();
        let cdc = &cd * cm;
        out += cm * r * &cd - (r * &cdc + &cdc * r) * C64::new(0.5, 0.0);
    }
    Operator::new(rho.space().clone(), out)
}

/// One nonzero entry of `H′(t)`:
/// `value · e^{i·frequency·t} · (Ω(t) if pumped else 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeTerm {
    pub row: usize,
    pub col: usize,
    pub value: C64,
    pub frequency: f64,
    pub pumped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    row: usize,
    col: usize,
    value: C64,
}

fn sparse(m: &DMatrix<C64>) -> Vec<Entry> {
    let mut out = Vec::new();
    for col in 0..m.ncols() {
        for row in 0..m.nrows() {
            let v = m[(row, col)];
            if v.norm() != 0.0 {
                out.push(Entry { row, col, value: v });
            }
        }
    }
    out
}

/// Sparse, time-dependent Lindblad generator evaluated in place.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    dim: usize,
    terms: Vec<TimeTerm>,
    pulse: Option<PulseProfile>,
    /// ½ Σ C†C
    half_decay: Vec<Entry>,
    jumps: Vec<Vec<Entry>>,
}

impl LindbladGenerator {
    pub fn new(dim: usize, terms: Vec<TimeTerm>, pulse: Option<PulseProfile>, collapse: &[Operator]) -> Self {
        let mut decay = DMatrix::<C64>::zeros(dim, dim);
        for c in collapse {
            decay += c.matrix().adjoint() * c.matrix() * C64::new(0.5, 0.0);
        }
        let jumps = collapse
            .iter()
            .map(|c| sparse(c.matrix()))
            .filter(|e| !e.is_empty())
            .collect();
        Self {
            dim,
            terms,
            pulse,
            half_decay: sparse(&decay),
            jumps,
        }
    }

    /// Constant `H` (all entries, including the diagonal) and collapse set.
    pub fn constant(h: &Operator, collapse: &[Operator]) -> Self {
        let terms = sparse(h.matrix())
            .into_iter()
            .map(|e| TimeTerm {
                row: e.row,
                col: e.col,
                value: e.value,
                frequency: 0.0,
                pumped: false,
            })
            .collect();
        Self::new(h.dim(), terms, None, collapse)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether `H′` is constant, given whether the pump is on.
    pub fn is_static(&self, pump_on: bool) -> bool {
        self.terms.iter().all(|t| (t.pumped && !pump_on) || t.frequency == 0.0)
    }

    /// Times where the pump envelope may be non-smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.pulse {
            Some(p) if self.terms.iter().any(|t| t.pumped) => vec![0.0, p.duration],
            _ => Vec::new(),
        }
    }

    /// `H′(t)` as a dense matrix.
    pub fn hamiltonian(&self, t: f64) -> DMatrix<C64> {
        let omega = self.pulse.map(|p| pulse_amplitude(&p, t)).unwrap_or(1.0);
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for term in &self.terms {
            let env = if term.pumped { omega } else { 1.0 };
            if env != 0.0 {
                h[(term.row, term.col)] += term.value * C64::from_polar(env, term.frequency * t);
            }
        }
        h
    }

    /// Writes `dρ/dt` into `out`.
    pub fn rhs(&self, t: f64, rho: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        let n = self.dim;
        let omega = self.pulse.map(|p| pulse_amplitude(&p, t)).unwrap_or(1.0);
        // X = G ρ with G = −iH′ − ½ΣC†C; then dρ = X + X† + Σ C ρ C†
        let mut x = DMatrix::<C64>::zeros(n, n);
        for term in &self.terms {
            let env = if term.pumped { omega } else { 1.0 };
            if env == 0.0 {
                continue;
            }
            let g = term.value * C64::from_polar(env, term.frequency * t) * C64::new(0.0, -1.0);
            axpy_row(&mut x, term.row, g, rho, term.col);
        }
        for e in &self.half_decay {
            axpy_row(&mut x, e.row, -e.value, rho, e.col);
        }
        out.copy_from(&x);
        *out += x.adjoint();

        let mut y = DMatrix::<C64>::zeros(n, n);
        for jump in &self.jumps {
            y.fill(C64::new(0.0, 0.0));
            for e in jump {
                axpy_row(&mut y, e.row, e.value, rho, e.col);
            }
            // out[:, j] += Σ_l y[:, l] conj(C_jl)
            for e in jump {
                let c = e.value.conj();
                for i in 0..n {
                    let v = y[(i, e.col)] * c;
                    out[(i, e.row)] += v;
                }
            }
        }
    }
}

/// `dst[row, :] += a · src[src_row, :]`
#[inline]
fn axpy_row(dst: &mut DMatrix<C64>, row: usize, a: C64, src: &DMatrix<C64>, src_row: usize) {
    for j in 0..src.ncols() {
        dst[(row, j)] += a * src[(src_row, j)];
    }
}
