//! Density matrices.

use crate::error::{CombError, Result};
use crate::linalg::{hermitian_eig, partial_trace, ComplexMatrix, C64, TOL_HERM};

/// Tolerance on |tr ρ − 1| and on negative eigenvalues.
pub const TOL_STATE: f64 = 1e-10;

/// Unit-trace positive semidefinite complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, TOL_STATE)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(CombError::InvalidState(format!(
                "{}x{} is not square",
                matrix.rows(),
                matrix.cols()
            )));
        }
        if !matrix.is_finite() {
            return Err(CombError::NonFinite);
        }
        let herm = matrix.hermiticity_error();
        if herm > TOL_HERM {
            return Err(CombError::InvalidState(format!(
                "not Hermitian ({herm:.3e})"
            )));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(CombError::InvalidState(format!(
                "trace {tr} differs from 1"
            )));
        }
        let spec = hermitian_eig(&matrix)?;
        let min = spec.eigenvalues.first().copied().unwrap_or(0.0);
        if min < -tol {
            return Err(CombError::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self {
            matrix: matrix.hermitian_part(),
        })
    }

    /// Symmetrizes and renormalizes an operator that is PSD up to rounding.
    /// Used internally where positivity holds by construction.
    pub(crate) fn from_psd_unchecked(matrix: ComplexMatrix) -> Self {
        let h = matrix.hermitian_part();
        let tr = h.trace().re;
        Self {
            matrix: if tr > 0.0 && (tr - 1.0).abs() > 1e-15 {
                h.scale_real(1.0 / tr)
            } else {
                h
            },
        }
    }

    /// |ψ><ψ| for a (normalized on entry) vector.
    pub fn pure(v: &[C64]) -> Result<Self> {
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(CombError::InvalidState(
                "zero or non-finite state vector".into(),
            ));
        }
        let u: Vec<C64> = v.iter().map(|z| z / norm).collect();
        Ok(Self::from_psd_unchecked(ComplexMatrix::outer(&u)))
    }

    /// |k><k| in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut m = ComplexMatrix::zeros(dim, dim);
        m[(k, k)] = C64::new(1.0, 0.0);
        Self { matrix: m }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    pub fn from_diag(p: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_real_diag(p))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self {
            matrix: self.matrix.kron(&other.matrix),
        }
    }

    pub fn tensor_all<'a>(states: impl IntoIterator<Item = &'a DensityMatrix>) -> Self {
        let mut acc = ComplexMatrix::identity(1);
        for s in states {
            acc = acc.kron(&s.matrix);
        }
        Self { matrix: acc }
    }

    /// Reduced state on the kept subsystems (ascending order).
    pub fn partial_trace(&self, dims: &[usize], keep: &[usize]) -> Result<Self> {
        Ok(Self {
            matrix: partial_trace(&self.matrix, dims, keep)?,
        })
    }

    /// All single-party marginals.
    pub fn marginals(&self, dims: &[usize]) -> Result<Vec<Self>> {
        (0..dims.len())
            .map(|k| self.partial_trace(dims, &[k]))
            .collect()
    }

    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        Self::from_psd_unchecked(self.matrix.conjugate_by(u))
    }

    pub fn expectation(&self, op: &ComplexMatrix) -> f64 {
        self.matrix.trace_product(op).re
    }

    /// Eigenvector of the largest eigenvalue.
    pub fn dominant_vector(&self) -> Vec<C64> {
        let spec = hermitian_eig(&self.matrix).expect("density matrices are Hermitian");
        spec.vector(spec.dim() - 1)
    }
}
