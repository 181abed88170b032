//! Hermitian eigendecomposition (nalgebra's symmetric QR solver, with cyclic
//! Jacobi rotations as a fallback) and the spectral matrix functions built on it.

use crate::error::{CombError, Result};
use crate::linalg::matrix::{ComplexMatrix, C64, ZERO};

/// Entrywise tolerance on |A − A†| accepted as Hermitian.
pub const TOL_HERM: f64 = 1e-10;

const MAX_SWEEPS: usize = 64;

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.eigenvectors.column(k)
    }

    /// V f(Λ) V†.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let vals: Vec<C64> = self
            .eigenvalues
            .iter()
            .map(|&x| C64::new(f(x), 0.0))
            .collect();
        self.rebuild(&vals)
    }

    /// V g(Λ) V† for a complex-valued g.
    pub fn map_complex(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let vals: Vec<C64> = self.eigenvalues.iter().map(|&x| f(x)).collect();
        self.rebuild(&vals)
    }

    fn rebuild(&self, vals: &[C64]) -> ComplexMatrix {
        let n = self.dim();
        let v = &self.eigenvectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lam) in vals.iter().enumerate() {
            if lam == ZERO {
                continue;
            }
            for r in 0..n {
                let a = v[(r, k)] * lam;
                if a == ZERO {
                    continue;
                }
                for c in 0..n {
                    out[(r, c)] += a * v[(c, k)].conj();
                }
            }
        }
        out
    }

    /// <v_k| m |v_k> for every eigenvector, i.e. the weights of `m` in this eigenbasis.
    pub fn diagonal_weights(&self, m: &ComplexMatrix) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|k| {
                let v = self.vector(k);
                let mv = m.mul_vec(&v);
                v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum::<C64>().re
            })
            .collect()
    }
}

/// Eigendecomposition of a Hermitian matrix.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<Spectrum> {
    if !m.is_square() {
        return Err(CombError::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let herm_err = m.hermiticity_error();
    let scale = m.max_abs().max(1.0);
    if herm_err > TOL_HERM * scale {
        return Err(CombError::NotHermitian(herm_err));
    }
    Ok(solve(m.hermitian_part()))
}

fn solve(a: ComplexMatrix) -> Spectrum {
    let n = a.rows();
    let m = nalgebra::DMatrix::from_row_slice(n, n, a.data());
    let eig = nalgebra::SymmetricEigen::new(m);
    if eig.eigenvalues.iter().any(|x| !x.is_finite())
        || eig.eigenvectors.iter().any(|z| !z.is_finite())
    {
        return jacobi(a);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Spectrum {
        eigenvalues,
        eigenvectors,
    }
}

fn jacobi(mut a: ComplexMatrix) -> Spectrum {
    let n = a.rows();
    let mut v = ComplexMatrix::identity(n);
    if n > 1 {
        let total: f64 = a.data().iter().map(|z| z.norm_sqr()).sum();
        let floor = (total * 1e-34).max(f64::MIN_POSITIVE);
        for _ in 0..MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[(p, q)].norm_sqr();
                }
            }
            if off <= floor {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Spectrum {
        eigenvalues,
        eigenvectors,
    }
}

fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // Phase e^{-iφ} on column q makes the pivot real; then a real symmetric Schur rotation.
    let phase = apq.conj() / r;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let upp = C64::new(c, 0.0);
    let upq = C64::new(s, 0.0);
    let uqp = phase * (-s);
    let uqq = phase * c;
    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * upp + akq * uqp;
        a[(k, q)] = akp * upq + akq * uqq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = upp.conj() * apk + uqp.conj() * aqk;
        a[(q, k)] = upq.conj() * apk + uqq.conj() * aqk;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * upp + vkq * uqp;
        v[(k, q)] = vkp * upq + vkq * uqq;
    }
}

/// exp(i·H) for Hermitian H.
pub fn expi_hermitian(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let spec = hermitian_eig(h)?;
    Ok(spec.map_complex(|x| C64::new(x.cos(), x.sin())))
}

/// Positive square root of a PSD matrix; negative noise eigenvalues clipped to 0.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let spec = hermitian_eig(m)?;
    Ok(spec.map(|x| x.max(0.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian, rng_for};

    fn reconstruct(spec: &Spectrum) -> ComplexMatrix {
        spec.map(|x| x)
    }

    #[test]
    fn diagonal_input() {
        let m = ComplexMatrix::from_real_diag(&[0.7, 0.3]);
        let s = hermitian_eig(&m).unwrap();
        assert!((s.eigenvalues[0] - 0.3).abs() < 1e-15);
        assert!((s.eigenvalues[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn pauli_x() {
        let x = ComplexMatrix::from_fn(2, 2, |r, c| if r != c { C64::new(1.0, 0.0) } else { ZERO });
        let s = hermitian_eig(&x).unwrap();
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((s.eigenvalues[1] - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = s.vector(0);
        // (|0> - |1>)/√2 up to a global phase
        let overlap = (v0[0] * h - v0[1] * h).norm();
        assert!((overlap - 1.0).abs() < 1e-12);
        let v1 = s.vector(1);
        let overlap = (v1[0] * h + v1[1] * h).norm();
        assert!((overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::from_fn(2, 2, |r, c| C64::new((r * 2 + c) as f64, 0.0));
        assert!(matches!(hermitian_eig(&m), Err(CombError::NotHermitian(_))));
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        let mut rng = rng_for(7, 0);
        for trial in 0..1000 {
            let dim = 1 + trial % 16;
            let a = random_hermitian(dim, &mut rng);
            let s = hermitian_eig(&a).unwrap();
            assert!(reconstruct(&s).max_abs_diff(&a) <= 1e-8);
            let vtv = s.eigenvectors.adjoint().matmul(&s.eigenvectors);
            assert!(vtv.max_abs_diff(&ComplexMatrix::identity(dim)) <= 1e-8);
            for k in 0..dim {
                let v = s.vector(k);
                let av = a.mul_vec(&v);
                for (x, y) in av.iter().zip(&v) {
                    assert!((x - y * s.eigenvalues[k]).norm() <= 1e-8);
                }
            }
            assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn degenerate_rank_one_projector() {
        // |I⟩⟩⟨⟨I|^{⊗3}: a 64x64 projector with 0/1 entries
        let mut v = vec![ZERO; 64];
        for j in 0..8 {
            let (a, b, c) = (j >> 2, (j >> 1) & 1, j & 1);
            v[(a * 2 + a) * 16 + (b * 2 + b) * 4 + c * 2 + c] = C64::new(1.0, 0.0);
        }
        let m = ComplexMatrix::outer(&v);
        let s = hermitian_eig(&m).unwrap();
        assert!(s.eigenvalues.iter().all(|x| x.is_finite()));
        assert!((s.eigenvalues[63] - 8.0).abs() < 1e-12);
        assert!(s.eigenvalues[..63].iter().all(|x| x.abs() < 1e-12));
    }
}
