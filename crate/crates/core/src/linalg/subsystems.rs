//! Multipartite index gymnastics: subsystem permutations, partial traces,
//! partial transposes.

use crate::error::{CombError, Result};
use crate::linalg::matrix::{ComplexMatrix, ZERO};

pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

/// Kronecker product of a list; the empty list gives the 1x1 identity.
pub fn tensor_all<'a>(ms: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    ms.into_iter()
        .fold(ComplexMatrix::identity(1), |acc, m| acc.kron(m))
}

fn check_dims(m: &ComplexMatrix, dims: &[usize]) -> Result<usize> {
    let total: usize = dims.iter().product();
    if !m.is_square() || m.rows() != total {
        return Err(CombError::DimensionMismatch(format!(
            "subsystem dims {dims:?} (product {total}) do not match a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    Ok(total)
}

/// For every flat index of the permuted space, the flat index in the original
/// space. `perm[k]` names the original subsystem placed at position k.
pub fn permutation_map(dims: &[usize], perm: &[usize]) -> Vec<usize> {
    let n = dims.len();
    let total: usize = dims.iter().product();
    let mut strides = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let mut map = Vec::with_capacity(total);
    let mut digits = vec![0usize; n];
    for _ in 0..total {
        let old: usize = digits
            .iter()
            .enumerate()
            .map(|(k, &d)| d * strides[perm[k]])
            .sum();
        map.push(old);
        for k in (0..n).rev() {
            digits[k] += 1;
            if digits[k] < new_dims[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    map
}

/// Reorders the tensor factors of a square operator.
pub fn permute_subsystems(
    m: &ComplexMatrix,
    dims: &[usize],
    perm: &[usize],
) -> Result<ComplexMatrix> {
    let total = check_dims(m, dims)?;
    check_perm(perm, dims.len())?;
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return Ok(m.clone());
    }
    let map = permutation_map(dims, perm);
    let data = m.data();
    Ok(ComplexMatrix::from_fn(total, total, |r, c| {
        data[map[r] * total + map[c]]
    }))
}

/// Reorders the tensor factors of a state vector.
pub fn permute_vector(
    v: &[crate::linalg::C64],
    dims: &[usize],
    perm: &[usize],
) -> Result<Vec<crate::linalg::C64>> {
    let total: usize = dims.iter().product();
    if v.len() != total {
        return Err(CombError::DimensionMismatch(format!(
            "vector of length {} vs dims {dims:?}",
            v.len()
        )));
    }
    check_perm(perm, dims.len())?;
    Ok(permutation_map(dims, perm)
        .into_iter()
        .map(|i| v[i])
        .collect())
}

fn check_perm(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(CombError::DimensionMismatch(format!(
            "permutation {perm:?} has wrong length for {n} subsystems"
        )));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(CombError::DimensionMismatch(format!(
                "invalid permutation {perm:?}"
            )));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Traces out every subsystem not listed in `keep`. Kept factors appear in
/// ascending subsystem order.
pub fn partial_trace(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    check_dims(m, dims)?;
    let n = dims.len();
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.iter().any(|&k| k >= n) {
        return Err(CombError::DimensionMismatch(format!(
            "keep set {keep:?} out of range for {n} subsystems"
        )));
    }
    let traced: Vec<usize> = (0..n).filter(|k| !kept.contains(k)).collect();
    let perm: Vec<usize> = kept.iter().chain(&traced).copied().collect();
    let pm = permute_subsystems(m, dims, &perm)?;
    let dk: usize = kept.iter().map(|&k| dims[k]).product();
    let dt: usize = traced.iter().map(|&k| dims[k]).product();
    Ok(trace_trailing(&pm, dk, dt))
}

/// tr_B of an operator on A⊗B with dim A = `keep_dim`, dim B = `traced_dim`.
pub fn trace_trailing(m: &ComplexMatrix, keep_dim: usize, traced_dim: usize) -> ComplexMatrix {
    let total = keep_dim * traced_dim;
    let data = m.data();
    let mut out = ComplexMatrix::zeros(keep_dim, keep_dim);
    for a in 0..keep_dim {
        for b in 0..keep_dim {
            let mut acc = ZERO;
            for t in 0..traced_dim {
                acc += data[(a * traced_dim + t) * total + b * traced_dim + t];
            }
            out[(a, b)] = acc;
        }
    }
    out
}

/// tr_A of an operator on A⊗B.
pub fn trace_leading(m: &ComplexMatrix, traced_dim: usize, keep_dim: usize) -> ComplexMatrix {
    let total = keep_dim * traced_dim;
    let data = m.data();
    let mut out = ComplexMatrix::zeros(keep_dim, keep_dim);
    for t in 0..traced_dim {
        for a in 0..keep_dim {
            for b in 0..keep_dim {
                out[(a, b)] += data[(t * keep_dim + a) * total + t * keep_dim + b];
            }
        }
    }
    out
}

/// Transposes the listed subsystems.
pub fn partial_transpose(
    m: &ComplexMatrix,
    dims: &[usize],
    which: &[usize],
) -> Result<ComplexMatrix> {
    let total = check_dims(m, dims)?;
    let n = dims.len();
    let mut strides = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let digit = |idx: usize, k: usize| (idx / strides[k]) % dims[k];
    let data = m.data();
    Ok(ComplexMatrix::from_fn(total, total, |r, c| {
        let mut rr = r;
        let mut cc = c;
        for &k in which {
            let dr = digit(r, k);
            let dc = digit(c, k);
            rr = rr - dr * strides[k] + dc * strides[k];
            cc = cc - dc * strides[k] + dr * strides[k];
        }
        data[rr * total + cc]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    fn bell() -> ComplexMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = vec![
            C64::new(h, 0.),
            C64::new(0., 0.),
            C64::new(0., 0.),
            C64::new(h, 0.),
        ];
        ComplexMatrix::outer(&v)
    }

    #[test]
    fn trace_of_product_state() {
        let rho = ComplexMatrix::from_real_diag(&[0.25, 0.75]);
        let sigma = ComplexMatrix::from_fn(2, 2, |r, c| match (r, c) {
            (0, 0) => C64::new(0.6, 0.),
            (1, 1) => C64::new(0.4, 0.),
            (0, 1) => C64::new(0.1, 0.2),
            _ => C64::new(0.1, -0.2),
        });
        let joint = rho.kron(&sigma);
        let a = partial_trace(&joint, &[2, 2], &[0]).unwrap();
        assert!(a.max_abs_diff(&rho) < 1e-15);
        let b = partial_trace(&joint, &[2, 2], &[1]).unwrap();
        assert!(b.max_abs_diff(&sigma) < 1e-15);
    }

    #[test]
    fn bell_marginal_is_maximally_mixed() {
        let r = partial_trace(&bell(), &[2, 2], &[0]).unwrap();
        assert!(r.max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5)) < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(partial_trace(&bell(), &[2, 3], &[0]).is_err());
    }

    #[test]
    fn permutation_swaps_factors() {
        let a = ComplexMatrix::from_real_diag(&[1., 2.]);
        let b = ComplexMatrix::from_real_diag(&[3., 5., 7.]);
        let ab = a.kron(&b);
        let ba = permute_subsystems(&ab, &[2, 3], &[1, 0]).unwrap();
        assert_eq!(ba, b.kron(&a));
    }

    #[test]
    fn three_party_trace_middle() {
        let a = ComplexMatrix::from_real_diag(&[0.5, 0.5]);
        let b = ComplexMatrix::from_real_diag(&[0.2, 0.8]);
        let c = ComplexMatrix::from_real_diag(&[0.1, 0.3, 0.6]);
        let abc = a.kron(&b).kron(&c);
        let ac = partial_trace(&abc, &[2, 2, 3], &[2, 0]).unwrap();
        assert!(ac.max_abs_diff(&a.kron(&c)) < 1e-15);
    }

    #[test]
    fn partial_transpose_of_product() {
        let a = ComplexMatrix::from_fn(2, 2, |r, c| {
            C64::new((r + 2 * c) as f64, r as f64 - c as f64)
        });
        let b = ComplexMatrix::from_fn(2, 2, |r, c| C64::new((3 * r + c) as f64, 1.0));
        let pt = partial_transpose(&a.kron(&b), &[2, 2], &[1]).unwrap();
        assert!(pt.max_abs_diff(&a.kron(&b.transpose())) < 1e-15);
    }
}
