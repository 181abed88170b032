//! Unconstrained real parametrizations of states, unitaries, isometries and channels.

use crate::channel::QuantumChannel;
use crate::linalg::{expi_hermitian, hermitian_eig, psd_sqrt, ComplexMatrix, C64};
use crate::state::DensityMatrix;

/// Number of reals describing a `dim`-dimensional mixed state.
pub fn state_len(dim: usize) -> usize {
    2 * dim * dim
}

fn complex_matrix(x: &[f64], rows: usize, cols: usize) -> ComplexMatrix {
    let n = rows * cols;
    ComplexMatrix::from_fn(rows, cols, |r, c| {
        C64::new(x[r * cols + c], x[n + r * cols + c])
    })
}

fn complex_params(m: &ComplexMatrix) -> Vec<f64> {
    let mut out: Vec<f64> = m.data().iter().map(|z| z.re).collect();
    out.extend(m.data().iter().map(|z| z.im));
    out
}

/// ρ = AA†/tr(AA†) with A built from `2·dim²` reals. The zero matrix maps to I/d.
pub fn state_from_params(x: &[f64], dim: usize) -> DensityMatrix {
    let a = complex_matrix(x, dim, dim);
    let aa = a.matmul(&a.adjoint());
    if aa.trace().re <= 0.0 || !aa.is_finite() {
        return DensityMatrix::maximally_mixed(dim);
    }
    DensityMatrix::from_psd_unchecked(aa)
}

/// Parameters reproducing `rho` (A = √ρ).
pub fn params_from_state(rho: &DensityMatrix) -> Vec<f64> {
    complex_params(&psd_sqrt(rho.matrix()).expect("density matrices are Hermitian"))
}

pub fn pure_len(dim: usize) -> usize {
    2 * dim
}

/// Normalized vector from `2·dim` reals (zero maps to |0⟩).
pub fn vector_from_params(x: &[f64], dim: usize) -> Vec<C64> {
    let mut v: Vec<C64> = (0..dim).map(|k| C64::new(x[k], x[dim + k])).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        v = vec![C64::new(0.0, 0.0); dim];
        v[0] = C64::new(1.0, 0.0);
    } else {
        for z in &mut v {
            *z /= norm;
        }
    }
    v
}

pub fn params_from_vector(v: &[C64]) -> Vec<f64> {
    let mut out: Vec<f64> = v.iter().map(|z| z.re).collect();
    out.extend(v.iter().map(|z| z.im));
    out
}

pub fn hermitian_len(dim: usize) -> usize {
    dim * dim
}

/// Hermitian matrix from `dim²` reals: diagonal first, then upper-triangle real and imaginary parts.
pub fn hermitian_from_params(x: &[f64], dim: usize) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(dim, dim);
    for k in 0..dim {
        h[(k, k)] = C64::new(x[k], 0.0);
    }
    let mut idx = dim;
    for r in 0..dim {
        for c in r + 1..dim {
            let z = C64::new(x[idx], x[idx + 1]);
            h[(r, c)] = z;
            h[(c, r)] = z.conj();
            idx += 2;
        }
    }
    h
}

/// exp(i·K(x))·base.
pub fn unitary_from_params(x: &[f64], base: &ComplexMatrix) -> ComplexMatrix {
    let k = hermitian_from_params(x, base.rows());
    expi_hermitian(&k)
        .expect("generator is Hermitian")
        .matmul(base)
}

pub fn isometry_len(rows: usize, cols: usize) -> usize {
    2 * rows * cols
}

/// Polar isometry M(M†M)^{-1/2} of the `rows×cols` matrix M built from reals.
pub fn isometry_from_params(x: &[f64], rows: usize, cols: usize) -> ComplexMatrix {
    let m = complex_matrix(x, rows, cols);
    let gram = m.adjoint().matmul(&m);
    let spec = hermitian_eig(&gram).expect("Gram matrices are Hermitian");
    let floor = 1e-14 * spec.eigenvalues.last().copied().unwrap_or(1.0).max(1e-300);
    let inv_sqrt = spec.map(|l| 1.0 / l.max(floor).sqrt());
    m.matmul(&inv_sqrt)
}

pub fn params_from_isometry(v: &ComplexMatrix) -> Vec<f64> {
    complex_params(v)
}

/// d→d channel from a Stinespring isometry into `d ⊗ env_dim`.
pub fn channel_from_params(x: &[f64], dim: usize, env_dim: usize) -> QuantumChannel {
    let v = isometry_from_params(x, dim * env_dim, dim);
    QuantumChannel::from_stinespring_unchecked(&v, dim, dim)
}

pub fn channel_len(dim: usize, env_dim: usize) -> usize {
    isometry_len(dim * env_dim, dim)
}

/// Parameters of `ch`; requires its Kraus rank to fit in `env_dim`.
pub fn params_from_channel(ch: &QuantumChannel, env_dim: usize) -> Option<Vec<f64>> {
    ch.stinespring(env_dim)
        .ok()
        .map(|v| params_from_isometry(&v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_channel, random_density, rng_for};

    #[test]
    fn state_round_trip() {
        let mut rng = rng_for(31, 0);
        for _ in 0..20 {
            let rho = random_density(3, &mut rng);
            let back = state_from_params(&params_from_state(&rho), 3);
            assert!(back.matrix().max_abs_diff(rho.matrix()) < 1e-10);
        }
    }

    #[test]
    fn zero_parameters_are_safe() {
        let rho = state_from_params(&[0.0; 8], 2);
        assert_eq!(rho, DensityMatrix::maximally_mixed(2));
        let v = vector_from_params(&[0.0; 4], 2);
        assert_eq!(v[0], C64::new(1.0, 0.0));
    }

    #[test]
    fn unitary_and_isometry_are_orthonormal() {
        let x: Vec<f64> = (0..32).map(|k| (k as f64 * 0.37).sin()).collect();
        let u = unitary_from_params(&x[..16], &ComplexMatrix::identity(4));
        assert!(
            u.adjoint()
                .matmul(&u)
                .max_abs_diff(&ComplexMatrix::identity(4))
                < 1e-12
        );
        let v = isometry_from_params(&x, 8, 2);
        assert!(
            v.adjoint()
                .matmul(&v)
                .max_abs_diff(&ComplexMatrix::identity(2))
                < 1e-12
        );
    }

    #[test]
    fn channel_round_trip() {
        let mut rng = rng_for(32, 0);
        let ch = random_channel(2, 2, 4, &mut rng);
        let p = params_from_channel(&ch, 4).unwrap();
        let back = channel_from_params(&p, 2, 4);
        assert!(back.choi_distance(&ch) < 1e-10);
        let (cp, tp) = back.cptp_residuals();
        assert!(cp < 1e-12 && tp < 1e-12);
    }
}
