//! Dense complex linear algebra shared by the meter, dynamics and formula
//! modules.
//!
//! Joint operators use the Kronecker layout with the system index major and
//! the meter index minor, so `tensor_product(a, b)[(i*db + k, j*db + l)]`
//! equals `a[(i, j)] * b[(k, l)]`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type StateVector = DVector<C64>;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const UNITARY_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Square complex matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix({}x{}) {}", self.dim(), self.dim(), self.0)
    }
}

impl ComplexMatrix {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entry".into()));
        }
        Ok(ComplexMatrix(m))
    }

    /// Builds a matrix from row-major rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| c(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        ComplexMatrix(DMatrix::from_fn(dim, dim, f))
    }

    pub fn identity(dim: usize) -> Self {
        ComplexMatrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        ComplexMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| c(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    /// `|v⟩⟨v|`
    pub fn projector(v: &StateVector) -> Self {
        ComplexMatrix(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn scale(&self, k: C64) -> Self {
        ComplexMatrix(&self.0 * k)
    }

    pub fn scale_real(&self, k: f64) -> Self {
        self.scale(c(k, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        &self.0 * v
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut out = Self::identity(self.dim());
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermitian_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_residual() < tol
    }

    /// Largest entrywise deviation of `U†U` from the identity.
    pub fn unitary_residual(&self) -> f64 {
        let prod = self.0.adjoint() * &self.0;
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - c(target, 0.0)).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitary_residual() < tol
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        (&self.0 - &other.0)
            .iter()
            .fold(0.0f64, |acc, z| acc.max(z.norm()))
    }

    /// Spectral norm, the largest singular value.
    pub fn operator_norm(&self) -> f64 {
        let gram = ComplexMatrix(self.0.adjoint() * &self.0);
        let spec = gram.eigh_unchecked();
        spec.values
            .iter()
            .fold(0.0f64, |acc, &v| acc.max(v))
            .max(0.0)
            .sqrt()
    }

    pub fn require_hermitian(&self, what: &str) -> Result<()> {
        let residual = self.hermitian_residual();
        if residual < HERMITIAN_TOL {
            Ok(())
        } else {
            Err(Error::NotHermitian {
                what: what.to_string(),
                residual,
            })
        }
    }

    pub fn require_unitary(&self, what: &str) -> Result<()> {
        let residual = self.unitary_residual();
        if residual < UNITARY_TOL {
            Ok(())
        } else {
            Err(Error::NotUnitary {
                what: what.to_string(),
                residual,
            })
        }
    }

    /// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
    pub fn eigh(&self) -> Result<Spectrum> {
        self.require_hermitian("matrix")?;
        Ok(self.eigh_unchecked())
    }

    fn eigh_unchecked(&self) -> Spectrum {
        let sym = (&self.0 + self.0.adjoint()) * c(0.5, 0.0);
        let eig = SymmetricEigen::new(sym);
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Spectrum {
            values,
            vectors: ComplexMatrix(vectors),
        }
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

/// Eigenvalues (ascending) and the unitary whose columns are eigenvectors.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V f(Λ) V†` for a scalar function of the eigenvalues.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let v = self.vectors.as_matrix();
        let mut scaled = v.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= w);
        }
        ComplexMatrix(scaled * v.adjoint())
    }
}

/// Kronecker product, `a` major and `b` minor.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix(a.0.kronecker(&b.0))
}

pub fn tensor_vector(a: &StateVector, b: &StateVector) -> StateVector {
    a.kronecker(b)
}

fn same_dim(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if a.dim() == b.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        })
    }
}

/// `ab - ba`
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    same_dim(a, b)?;
    Ok(&(a * b) - &(b * a))
}

/// `ab + ba`
pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    same_dim(a, b)?;
    Ok(&(a * b) + &(b * a))
}

/// `exp(-i theta h)` for Hermitian `h`, through its eigendecomposition.
pub fn hermitian_exponential(h: &ComplexMatrix, theta: f64) -> Result<ComplexMatrix> {
    let spectrum = h.eigh()?;
    Ok(spectrum.map(|lambda| C64::from_polar(1.0, -theta * lambda)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Pure,
    Mixed,
}

/// Normalized pure vector or density matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum QuantumState {
    Pure(StateVector),
    Mixed(ComplexMatrix),
}

pub const NORM_TOL: f64 = 1e-12;
pub const NEGATIVE_EIGEN_TOL: f64 = 1e-10;

impl QuantumState {
    pub fn pure(v: StateVector) -> Result<Self> {
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("state amplitude".into()));
        }
        let norm = v.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "pure state norm {norm:.15} differs from 1"
            )));
        }
        Ok(QuantumState::Pure(v))
    }

    /// Rescales `v` to unit norm before validation.
    pub fn pure_normalized(v: StateVector) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() || norm <= 0.0 {
            return Err(Error::InvalidState("zero or non-finite vector".into()));
        }
        Self::pure(v.unscale(norm))
    }

    pub fn from_amplitudes(amps: &[C64]) -> Result<Self> {
        Self::pure(StateVector::from_column_slice(amps))
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = StateVector::zeros(dim);
        v[k] = c(1.0, 0.0);
        QuantumState::Pure(v)
    }

    pub fn mixed(rho: ComplexMatrix) -> Result<Self> {
        let herm = rho.hermitian_residual();
        if herm > NORM_TOL {
            return Err(Error::NotHermitian {
                what: "density matrix".into(),
                residual: herm,
            });
        }
        let tr = rho.trace();
        if (tr - c(1.0, 0.0)).norm() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix trace {tr} differs from 1"
            )));
        }
        let spec = rho.eigh_unchecked();
        if let Some(&min) = spec.values.first() {
            if min < -NEGATIVE_EIGEN_TOL {
                return Err(Error::InvalidState(format!(
                    "density matrix has negative eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(QuantumState::Mixed(rho))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        QuantumState::Mixed(ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64))
    }

    pub fn kind(&self) -> StateKind {
        match self {
            QuantumState::Pure(_) => StateKind::Pure,
            QuantumState::Mixed(_) => StateKind::Mixed,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            QuantumState::Pure(v) => v.len(),
            QuantumState::Mixed(m) => m.dim(),
        }
    }

    pub fn density_matrix(&self) -> ComplexMatrix {
        match self {
            QuantumState::Pure(v) => ComplexMatrix::projector(v),
            QuantumState::Mixed(m) => m.clone(),
        }
    }

    /// Decomposes the state into weighted pure components. Weights below
    /// `1e-15` are dropped and small negative eigenvalues are clamped.
    pub fn ensemble(&self) -> Vec<(f64, StateVector)> {
        match self {
            QuantumState::Pure(v) => vec![(1.0, v.clone())],
            QuantumState::Mixed(m) => {
                let spec = m.eigh_unchecked();
                let vecs = spec.vectors.as_matrix();
                spec.values
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 1e-15)
                    .map(|(j, &p)| (p, vecs.column(j).into_owned()))
                    .collect()
            }
        }
    }

    /// `U|ψ⟩` or `UρU†`.
    pub fn transformed(&self, u: &ComplexMatrix) -> QuantumState {
        match self {
            QuantumState::Pure(v) => QuantumState::Pure(u.apply(v)),
            QuantumState::Mixed(m) => QuantumState::Mixed(&(u * m) * &u.adjoint()),
        }
    }

    fn check_dim(&self, o: &ComplexMatrix) -> Result<()> {
        if self.dim() == o.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: o.dim(),
            })
        }
    }
}

/// `⟨ψ|o|ψ⟩` or `tr(ρo)`.
pub fn expectation(state: &QuantumState, o: &ComplexMatrix) -> Result<C64> {
    state.check_dim(o)?;
    Ok(match state {
        QuantumState::Pure(v) => v.dotc(&o.apply(v)),
        QuantumState::Mixed(rho) => (rho * o).trace(),
    })
}

/// `⟨o²⟩ - ⟨o⟩²` for Hermitian `o`.
pub fn variance(state: &QuantumState, o: &ComplexMatrix) -> Result<f64> {
    o.require_hermitian("observable")?;
    let mean = expectation(state, o)?.re;
    let second = expectation(state, &(o * o))?.re;
    Ok(second - mean * mean)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[
        vec![c(0.0, 0.0), c(0.0, -1.0)],
        vec![c(0.0, 1.0), c(0.0, 0.0)],
    ])
    .unwrap()
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real_diagonal(&[1.0, -1.0])
}

/// `J_z` for spin `j = (dim-1)/2`, diagonal `(j, j-1, ..., -j)`.
pub fn spin_z(dim: usize) -> ComplexMatrix {
    let j = (dim as f64 - 1.0) / 2.0;
    let diag: Vec<f64> = (0..dim).map(|m| j - m as f64).collect();
    ComplexMatrix::from_real_diagonal(&diag)
}
