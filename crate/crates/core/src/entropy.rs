//! Entropic functionals, all in nats.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::{Serialize, Serializer};

use crate::error::{CombError, Result};
use crate::linalg::{hermitian_eig, ComplexMatrix};
use crate::state::DensityMatrix;

/// Eigenvalues below this are treated as exact zeros before taking logs.
pub const EIG_CLIP: f64 = 1e-12;
/// Weight of ρ on the kernel of σ above which S(ρ||σ) is infinite.
pub const SUPPORT_TOL: f64 = 1e-9;

/// A real number or +∞. Infinity orders above every finite value and absorbs sums.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::Infinite => None,
        }
    }

    /// Finite value, or `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn scale(self, k: f64) -> Self {
        match self {
            ExtReal::Finite(x) => ExtReal::Finite(x * k),
            ExtReal::Infinite => ExtReal::Infinite,
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::Infinite, ExtReal::Infinite) => Some(Ordering::Equal),
            (ExtReal::Infinite, _) => Some(Ordering::Greater),
            (_, ExtReal::Infinite) => Some(Ordering::Less),
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl Add for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::Infinite,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        if x == f64::INFINITY {
            ExtReal::Infinite
        } else {
            ExtReal::Finite(x)
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(x) => s.serialize_f64(*x),
            ExtReal::Infinite => s.serialize_str("inf"),
        }
    }
}

fn xlnx(x: f64) -> f64 {
    if x <= EIG_CLIP {
        0.0
    } else {
        x * x.ln()
    }
}

/// Von Neumann entropy −Σ λ ln λ.
pub fn vn_entropy(rho: &DensityMatrix) -> f64 {
    let spec = hermitian_eig(rho.matrix()).expect("density matrices are Hermitian");
    let s: f64 = -spec.eigenvalues.iter().map(|&l| xlnx(l)).sum::<f64>();
    s.max(0.0)
}

/// Relative entropy S(ρ||σ) = tr ρ (ln ρ − ln σ).
pub fn rel_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<ExtReal> {
    if rho.dim() != sigma.dim() {
        return Err(CombError::DimensionMismatch(format!(
            "relative entropy between dimensions {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    Ok(rel_entropy_matrices(rho.matrix(), sigma.matrix()))
}

pub(crate) fn rel_entropy_matrices(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> ExtReal {
    let sspec = hermitian_eig(sigma).expect("density matrices are Hermitian");
    let weights = sspec.diagonal_weights(rho);
    let mut cross = 0.0;
    for (&lam, &w) in sspec.eigenvalues.iter().zip(&weights) {
        if lam <= EIG_CLIP {
            if w > SUPPORT_TOL {
                return ExtReal::Infinite;
            }
        } else {
            cross += w * lam.ln();
        }
    }
    let rspec = hermitian_eig(rho).expect("density matrices are Hermitian");
    let neg_entropy: f64 = rspec.eigenvalues.iter().map(|&l| xlnx(l)).sum();
    ExtReal::Finite((neg_entropy - cross).max(0.0))
}

/// Trace norm ||a − b||₁.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(CombError::DimensionMismatch(format!(
            "trace distance between dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let diff = a.matrix() - b.matrix();
    let spec = hermitian_eig(&diff)?;
    Ok(spec.eigenvalues.iter().map(|x| x.abs()).sum())
}

/// Multipartite mutual information Σᵢ S(ρᵢ) − S(ρ).
pub fn multi_mutual_info(rho: &DensityMatrix, dims: &[usize]) -> Result<f64> {
    let marginals = rho.marginals(dims)?;
    let sum: f64 = marginals.iter().map(vn_entropy).sum();
    Ok((sum - vn_entropy(rho)).max(0.0))
}

/// The same quantity as S(ρ || ⊗ᵢ ρᵢ).
pub fn multi_mutual_info_relative(rho: &DensityMatrix, dims: &[usize]) -> Result<ExtReal> {
    let marginals = rho.marginals(dims)?;
    let product = DensityMatrix::tensor_all(&marginals);
    rel_entropy(rho, &product)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::random::{random_channel, random_density, random_unitary, rng_for};

    fn thermal_qubit(e: f64, kt: f64) -> DensityMatrix {
        let z = 1.0 + (-e / kt).exp();
        DensityMatrix::from_diag(&[1.0 / z, (-e / kt).exp() / z]).unwrap()
    }

    #[test]
    fn entropy_values() {
        assert!(vn_entropy(&DensityMatrix::basis(2, 1)).abs() < 1e-15);
        assert!((vn_entropy(&DensityMatrix::maximally_mixed(2)) - 2f64.ln()).abs() < 1e-14);
        let p1 = (-1f64).exp() / (1.0 + (-1f64).exp());
        let p0 = 1.0 - p1;
        let expected = -p0 * p0.ln() - p1 * p1.ln();
        assert!((vn_entropy(&thermal_qubit(1.0, 1.0)) - expected).abs() < 1e-14);
    }

    #[test]
    fn relative_entropy_values() {
        let g = thermal_qubit(1.0, 1.0);
        assert_eq!(rel_entropy(&g, &g).unwrap(), ExtReal::Finite(0.0));
        let s = rel_entropy(&DensityMatrix::basis(2, 1), &g)
            .unwrap()
            .to_f64();
        let expected = 1.0 + (1.0 + (-1f64).exp()).ln();
        assert!((s - expected).abs() < 1e-13);
        let inf = rel_entropy(&DensityMatrix::basis(2, 0), &DensityMatrix::basis(2, 1)).unwrap();
        assert_eq!(inf, ExtReal::Infinite);
        assert!(rel_entropy(&g, &DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn infinity_ordering_and_sums() {
        assert!(ExtReal::Infinite > ExtReal::Finite(1e300));
        assert_eq!(ExtReal::Finite(1.0) + ExtReal::Infinite, ExtReal::Infinite);
        assert_eq!(
            ExtReal::Finite(1.0) + ExtReal::Finite(2.0),
            ExtReal::Finite(3.0)
        );
    }

    #[test]
    fn trace_distance_values() {
        let a = DensityMatrix::basis(2, 0);
        let b = DensityMatrix::basis(2, 1);
        assert!((trace_distance(&a, &b).unwrap() - 2.0).abs() < 1e-14);
        assert!(trace_distance(&a, &a).unwrap().abs() < 1e-14);
    }

    #[test]
    fn mutual_information_values() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let z = C64::new(0.0, 0.0);
        let bell = DensityMatrix::pure(&[C64::new(h, 0.), z, z, C64::new(h, 0.)]).unwrap();
        assert!((multi_mutual_info(&bell, &[2, 2]).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-13);
        let prod = thermal_qubit(1.0, 1.0).tensor(&DensityMatrix::maximally_mixed(2));
        assert!(multi_mutual_info(&prod, &[2, 2]).unwrap().abs() < 1e-13);

        // |00> + e^{-E/2kT}|11>: pure, thermal marginals, I = 2 S(γ)
        let q = (-0.5f64).exp();
        let psi = DensityMatrix::pure(&[C64::new(1.0, 0.), z, z, C64::new(q, 0.)]).unwrap();
        let s_gamma = vn_entropy(&thermal_qubit(1.0, 1.0));
        assert!((multi_mutual_info(&psi, &[2, 2]).unwrap() - 2.0 * s_gamma).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_two_routes_agree() {
        let mut rng = rng_for(11, 0);
        for i in 0..50 {
            let dims: &[usize] = if i % 2 == 0 { &[2, 2] } else { &[2, 2, 2] };
            let d: usize = dims.iter().product();
            let rho = random_density(d, &mut rng);
            let a = multi_mutual_info(&rho, dims).unwrap();
            let b = multi_mutual_info_relative(&rho, dims).unwrap().to_f64();
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn unitary_invariance() {
        let mut rng = rng_for(12, 0);
        for _ in 0..50 {
            let rho = random_density(4, &mut rng);
            let u = random_unitary(4, &mut rng);
            let s1 = vn_entropy(&rho);
            let s2 = vn_entropy(&rho.conjugate_by(&u));
            assert!((s1 - s2).abs() < 1e-9);
        }
    }

    #[test]
    fn decomposition_with_mutual_information() {
        let mut rng = rng_for(13, 0);
        for _ in 0..50 {
            let rho12 = random_density(4, &mut rng);
            let s1 = random_density(2, &mut rng);
            let s2 = random_density(2, &mut rng);
            let lhs = rel_entropy(&rho12, &s1.tensor(&s2)).unwrap().to_f64();
            let m = rho12.marginals(&[2, 2]).unwrap();
            let rhs = rel_entropy(&m[0], &s1).unwrap().to_f64()
                + rel_entropy(&m[1], &s2).unwrap().to_f64()
                + multi_mutual_info(&rho12, &[2, 2]).unwrap();
            assert!((lhs - rhs).abs() < 1e-8);
        }
    }

    #[test]
    fn data_processing_small_sample() {
        let mut rng = rng_for(14, 0);
        for _ in 0..30 {
            let rho = random_density(2, &mut rng);
            let sigma = random_density(2, &mut rng);
            let ch = random_channel(2, 2, 3, &mut rng);
            let before = rel_entropy(&rho, &sigma).unwrap().to_f64();
            let after = rel_entropy(&ch.apply(&rho).unwrap(), &ch.apply(&sigma).unwrap())
                .unwrap()
                .to_f64();
            assert!(after <= before + 1e-8);
        }
    }
}
