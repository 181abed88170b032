//! Seeded random ensembles: Ginibre states, Haar unitaries, random channels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::QuantumChannel;
use crate::linalg::{ComplexMatrix, C64, ZERO};
use crate::state::DensityMatrix;

pub type SeededRng = ChaCha8Rng;

/// Independent deterministic stream `stream` of generator `seed`.
pub fn rng_for(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian_c64(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    ginibre(dim, dim, rng).hermitian_part()
}

/// Orthonormalizes the columns of `m` (modified Gram–Schmidt, two passes).
pub fn orthonormalize_columns(m: &ComplexMatrix) -> ComplexMatrix {
    let (rows, cols) = (m.rows(), m.cols());
    let mut q: Vec<Vec<C64>> = Vec::with_capacity(cols);
    for c in 0..cols {
        let mut v = m.column(c);
        for _ in 0..2 {
            for u in &q {
                let proj: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= proj * y;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= norm;
        }
        q.push(v);
    }
    ComplexMatrix::from_fn(rows, cols, |r, c| q[c][r])
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    orthonormalize_columns(&ginibre(dim, dim, rng))
}

/// Random isometry `dim_in → dim_out` (columns orthonormal).
pub fn random_isometry<R: Rng + ?Sized>(
    dim_out: usize,
    dim_in: usize,
    rng: &mut R,
) -> ComplexMatrix {
    orthonormalize_columns(&ginibre(dim_out, dim_in, rng))
}

/// Hilbert–Schmidt random mixed state.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let a = ginibre(dim, dim, rng);
    DensityMatrix::from_psd_unchecked(a.matmul(&a.adjoint()))
}

pub fn random_pure<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let v: Vec<C64> = (0..dim).map(|_| gaussian_c64(rng)).collect();
    DensityMatrix::pure(&v).expect("gaussian vector is nonzero")
}

/// Random channel with Kraus rank at most `rank`, from a random Stinespring isometry.
pub fn random_channel<R: Rng + ?Sized>(
    dim_in: usize,
    dim_out: usize,
    rank: usize,
    rng: &mut R,
) -> QuantumChannel {
    let v = random_isometry(dim_out * rank, dim_in, rng);
    QuantumChannel::from_stinespring(&v, dim_in, dim_out).expect("isometry gives a valid channel")
}

/// Zero vector of the given length.
pub fn zero_vec(n: usize) -> Vec<C64> {
    vec![ZERO; n]
}
