//! Dense complex operator algebra on small tensor-product Hilbert spaces.
//!
//! Factors are ordered as given; basis index `(i_0, i_1, ...)` maps to the
//! flat index with the first factor most significant, matching
//! `kron(A_0, kron(A_1, ...))`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Eigenvalue floor for density-matrix validation.
pub const POSITIVITY_TOLERANCE: f64 = 1e-8;

pub const ATOM: &str = "atom";
pub const CAVITY_X: &str = "cavity_x";
pub const CAVITY_Y: &str = "cavity_y";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    factors: Vec<Factor>,
    total_dim: usize,
}

impl HilbertSpace {
    pub fn new<S: Into<String>>(factors: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let factors: Vec<Factor> = factors
            .into_iter()
            .map(|(label, dim)| Factor {
                label: label.into(),
                dim,
            })
            .collect();
        if factors.is_empty() {
            return Err(Error::InvalidSpace("no factors".into()));
        }
        for (i, f) in factors.iter().enumerate() {
            if f.dim == 0 {
                return Err(Error::InvalidSpace(format!("factor `{}` has dimension 0", f.label)));
            }
            if factors[..i].iter().any(|g| g.label == f.label) {
                return Err(Error::InvalidSpace(format!("duplicate label `{}`", f.label)));
            }
        }
        let total_dim = factors.iter().map(|f| f.dim).product();
        Ok(Self { factors, total_dim })
    }

    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new([(label.into(), dim)])
    }

    /// The `atom ⊗ cavity_x ⊗ cavity_y` space used throughout the model.
    pub fn atom_cavity(atom_levels: usize, fock_truncation: usize) -> Result<Self> {
        if fock_truncation < 2 {
            return Err(Error::InvalidDimension(fock_truncation));
        }
        Self::new([
            (ATOM, atom_levels),
            (CAVITY_X, fock_truncation),
            (CAVITY_Y, fock_truncation),
        ])
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn factor_index(&self, label: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.label == label)
            .ok_or_else(|| Error::UnknownFactor(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.factors[self.factor_index(label)?].dim)
    }

    /// Flat index of a product basis state.
    pub fn basis_index(&self, indices: &[usize]) -> Result<usize> {
        if indices.len() != self.factors.len() {
            return Err(Error::DimensionMismatch {
                expected: self.factors.len(),
                found: indices.len(),
            });
        }
        let mut flat = 0;
        for (f, &i) in self.factors.iter().zip(indices) {
            if i >= f.dim {
                return Err(Error::DimensionMismatch {
                    expected: f.dim,
                    found: i + 1,
                });
            }
            flat = flat * f.dim + i;
        }
        Ok(flat)
    }

    /// Inverse of [`basis_index`](Self::basis_index).
    pub fn factor_indices(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for (slot, f) in out.iter_mut().zip(&self.factors).rev() {
            *slot = flat % f.dim;
            flat /= f.dim;
        }
        out
    }

    pub fn basis_ket(&self, indices: &[usize]) -> Result<DVector<C64>> {
        let mut ket = DVector::zeros(self.total_dim);
        ket[self.basis_index(indices)?] = C64::new(1.0, 0.0);
        Ok(ket)
    }
}

impl fmt::Display for HilbertSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|x| format!("{}({})", x.label, x.dim))
            .collect();
        write!(f, "{}", parts.join(" ⊗ "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: HilbertSpace,
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn new(space: HilbertSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let n = space.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if matrix.nrows() != n {
                    matrix.nrows()
                } else {
                    matrix.ncols()
                },
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn identity(space: &HilbertSpace) -> Self {
        let n = space.total_dim();
        Self {
            space: space.clone(),
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(space: &HilbertSpace) -> Self {
        let n = space.total_dim();
        Self {
            space: space.clone(),
            matrix: DMatrix::zeros(n, n),
        }
    }

    pub fn from_diagonal(space: &HilbertSpace, diag: &[f64]) -> Result<Self> {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self::new(space.clone(), DMatrix::from_diagonal(&d))
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            space: self.space.clone(),
            matrix: &self.matrix * c,
        }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.check_space(other)?;
        Ok(Self {
            space: self.space.clone(),
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
        })
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        (&self.matrix - &other.matrix)
            .iter()
            .fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.matrix[(i, j)] == C64::new(0.0, 0.0)))
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        let gram = self.matrix.adjoint() * &self.matrix;
        gram.symmetric_eigenvalues()
            .iter()
            .fold(0.0_f64, |m, &x| m.max(x))
            .sqrt()
    }

    pub fn apply(&self, ket: &DVector<C64>) -> DVector<C64> {
        &self.matrix * ket
    }

    fn check_space(&self, other: &Operator) -> Result<()> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(())
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;

    fn mul(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator product across spaces");
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;

    fn add(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator sum across spaces");
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;

    fn sub(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator difference across spaces");
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

/// Truncated Fock-space lowering operator on a single mode.
pub fn annihilation(dim: usize) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Operator::new(HilbertSpace::single("mode", dim)?, m)
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` on the factor labelled `target`.
pub fn embed(op: &Operator, target: &str, space: &HilbertSpace) -> Result<Operator> {
    let idx = space.factor_index(target)?;
    let want = space.factors()[idx].dim;
    if op.dim() != want {
        return Err(Error::DimensionMismatch {
            expected: want,
            found: op.dim(),
        });
    }
    let mut out = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    for (i, f) in space.factors().iter().enumerate() {
        out = if i == idx {
            out.kronecker(op.matrix())
        } else {
            out.kronecker(&DMatrix::<C64>::identity(f.dim, f.dim))
        };
    }
    Operator::new(space.clone(), out)
}

/// Projector-like `|row⟩⟨col|` on a single factor, embedded into `space`.
pub fn factor_outer(space: &HilbertSpace, target: &str, row: usize, col: usize) -> Result<Operator> {
    let dim = space.dim_of(target)?;
    if row >= dim || col >= dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: row.max(col) + 1,
        });
    }
    let mut m = DMatrix::zeros(dim, dim);
    m[(row, col)] = C64::new(1.0, 0.0);
    embed(&Operator::new(HilbertSpace::single(target, dim)?, m)?, target, space)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: HilbertSpace,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(space: HilbertSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let rho = Self::new_unchecked(space, matrix)?;
        rho.validate(1e-8)?;
        Ok(rho)
    }

    /// Shape check only. Used for integrator output, where small drift is
    /// reported by the caller instead of rejected.
    pub fn new_unchecked(space: HilbertSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let op = Operator::new(space, matrix)?;
        Ok(Self {
            space: op.space,
            matrix: op.matrix,
        })
    }

    pub fn from_ket(space: &HilbertSpace, ket: &DVector<C64>) -> Result<Self> {
        if ket.len() != space.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: space.total_dim(),
                found: ket.len(),
            });
        }
        let norm = ket.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let k = ket / C64::new(norm, 0.0);
        Self::new(space.clone(), &k * k.adjoint())
    }

    pub fn basis_state(space: &HilbertSpace, indices: &[usize]) -> Result<Self> {
        Self::from_ket(space, &space.basis_ket(indices)?)
    }

    pub fn maximally_mixed(space: &HilbertSpace) -> Self {
        let n = space.total_dim();
        Self {
            space: space.clone(),
            matrix: DMatrix::identity(n, n) / C64::new(n as f64, 0.0),
        }
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > tol {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOLERANCE {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        // Tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |m, &x| m.min(x))
    }

    /// Diagonal element for a product basis state.
    pub fn population(&self, indices: &[usize]) -> Result<f64> {
        let i = self.space.basis_index(indices)?;
        Ok(self.matrix[(i, i)].re)
    }

    pub fn as_operator(&self) -> Operator {
        Operator {
            space: self.space.clone(),
            matrix: self.matrix.clone(),
        }
    }
}

/// `Tr(ρ · op)`.
pub fn expectation(rho: &DensityMatrix, op: &Operator) -> Result<C64> {
    if rho.space() != op.space() {
        return Err(Error::SpaceMismatch);
    }
    Ok(trace_product(rho.matrix(), op.matrix()))
}

/// `Tr(A · B)` without forming the product.
pub(crate) fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}
