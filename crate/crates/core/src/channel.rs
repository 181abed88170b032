//! CPTP maps stored as Choi matrices.
//!
//! Convention: `C = Σ_{jk} |j⟩⟨k| ⊗ E(|j⟩⟨k|)`, input factor first, so trace
//! preservation reads `tr_out C = I_in`.

use crate::error::{CombError, Result};
use crate::linalg::{hermitian_eig, permute_subsystems, trace_trailing, ComplexMatrix, C64, ZERO};
use crate::state::DensityMatrix;

/// Tolerance on `tr_out C − I`.
pub const TOL_TP: f64 = 1e-8;
/// Tolerance on negative Choi eigenvalues.
pub const TOL_CP: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct QuantumChannel {
    dim_in: usize,
    dim_out: usize,
    choi: ComplexMatrix,
    // Set when the channel is a unitary conjugation; enables a faster apply.
    unitary: Option<ComplexMatrix>,
}

impl QuantumChannel {
    /// Validating constructor.
    pub fn from_choi(dim_in: usize, dim_out: usize, choi: ComplexMatrix) -> Result<Self> {
        let n = dim_in * dim_out;
        if choi.rows() != n || choi.cols() != n {
            return Err(CombError::DimensionMismatch(format!(
                "Choi matrix {}x{} for a {dim_in}->{dim_out} channel",
                choi.rows(),
                choi.cols()
            )));
        }
        let ch = Self {
            dim_in,
            dim_out,
            choi: choi.hermitian_part(),
            unitary: None,
        };
        if choi.hermiticity_error() > 1e-10 {
            return Err(CombError::InvalidChannel(
                "Choi matrix is not Hermitian".into(),
            ));
        }
        let (cp, tp) = ch.cptp_residuals();
        if cp > TOL_CP {
            return Err(CombError::InvalidChannel(format!(
                "not completely positive (min Choi eigenvalue {:.3e})",
                -cp
            )));
        }
        if tp > TOL_TP {
            return Err(CombError::InvalidChannel(format!(
                "not trace preserving (residual {tp:.3e})"
            )));
        }
        Ok(ch)
    }

    pub(crate) fn from_choi_unchecked(dim_in: usize, dim_out: usize, choi: ComplexMatrix) -> Self {
        Self {
            dim_in,
            dim_out,
            choi: choi.hermitian_part(),
            unitary: None,
        }
    }

    /// Choi of a linear map given by its action on matrix units |j⟩⟨k|.
    pub fn from_linear_map(
        dim_in: usize,
        dim_out: usize,
        f: impl Fn(&ComplexMatrix) -> ComplexMatrix,
    ) -> Result<Self> {
        let n = dim_in * dim_out;
        let mut choi = ComplexMatrix::zeros(n, n);
        for j in 0..dim_in {
            for k in 0..dim_in {
                let mut unit = ComplexMatrix::zeros(dim_in, dim_in);
                unit[(j, k)] = C64::new(1.0, 0.0);
                let img = f(&unit);
                if img.rows() != dim_out || img.cols() != dim_out {
                    return Err(CombError::DimensionMismatch(format!(
                        "map produced a {}x{} output, expected {dim_out}",
                        img.rows(),
                        img.cols()
                    )));
                }
                for a in 0..dim_out {
                    for b in 0..dim_out {
                        choi[(j * dim_out + a, k * dim_out + b)] = img[(a, b)];
                    }
                }
            }
        }
        Self::from_choi(dim_in, dim_out, choi)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_unitary(&ComplexMatrix::identity(dim)).expect("identity is unitary")
    }

    /// ρ ↦ UρU†.
    pub fn from_unitary(u: &ComplexMatrix) -> Result<Self> {
        if !u.is_square() {
            return Err(CombError::DimensionMismatch(
                "unitary must be square".into(),
            ));
        }
        let d = u.rows();
        let err = u
            .adjoint()
            .matmul(u)
            .max_abs_diff(&ComplexMatrix::identity(d));
        if err > 1e-10 {
            return Err(CombError::InvalidChannel(format!(
                "matrix is not unitary ({err:.3e})"
            )));
        }
        Ok(Self::from_unitary_unchecked(u))
    }

    pub(crate) fn from_unitary_unchecked(u: &ComplexMatrix) -> Self {
        let d = u.rows();
        // |U⟩⟩ = Σ_j |j⟩ ⊗ U|j⟩
        let mut vec = vec![ZERO; d * d];
        for j in 0..d {
            for a in 0..d {
                vec[j * d + a] = u[(a, j)];
            }
        }
        Self {
            dim_in: d,
            dim_out: d,
            choi: ComplexMatrix::outer(&vec),
            unitary: Some(u.clone()),
        }
    }

    /// Channel from Kraus operators (each `dim_out × dim_in`).
    pub fn from_kraus(kraus: &[ComplexMatrix]) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| CombError::InvalidChannel("empty Kraus list".into()))?;
        let (dim_out, dim_in) = (first.rows(), first.cols());
        let n = dim_in * dim_out;
        let mut choi = ComplexMatrix::zeros(n, n);
        for k in kraus {
            if (k.rows(), k.cols()) != (dim_out, dim_in) {
                return Err(CombError::DimensionMismatch(
                    "Kraus operators differ in shape".into(),
                ));
            }
            let mut vec = vec![ZERO; n];
            for j in 0..dim_in {
                for a in 0..dim_out {
                    vec[j * dim_out + a] = k[(a, j)];
                }
            }
            choi.add_assign_scaled(&ComplexMatrix::outer(&vec), C64::new(1.0, 0.0));
        }
        Self::from_choi(dim_in, dim_out, choi)
    }

    /// Channel `ρ ↦ tr_env V ρ V†` for an isometry `V: in → out ⊗ env`
    /// (row index `a·env + m`).
    pub fn from_stinespring(v: &ComplexMatrix, dim_in: usize, dim_out: usize) -> Result<Self> {
        if v.cols() != dim_in || !v.rows().is_multiple_of(dim_out) {
            return Err(CombError::DimensionMismatch(format!(
                "{}x{} isometry for a {dim_in}->{dim_out} channel",
                v.rows(),
                v.cols()
            )));
        }
        Ok(Self::from_stinespring_unchecked(v, dim_in, dim_out))
    }

    pub(crate) fn from_stinespring_unchecked(
        v: &ComplexMatrix,
        dim_in: usize,
        dim_out: usize,
    ) -> Self {
        let env = v.rows() / dim_out;
        let n = dim_in * dim_out;
        let mut choi = ComplexMatrix::zeros(n, n);
        let mut vec = vec![ZERO; n];
        for m in 0..env {
            for j in 0..dim_in {
                for a in 0..dim_out {
                    vec[j * dim_out + a] = v[(a * env + m, j)];
                }
            }
            for r in 0..n {
                let x = vec[r];
                if x == ZERO {
                    continue;
                }
                for c in 0..n {
                    choi[(r, c)] += x * vec[c].conj();
                }
            }
        }
        Self::from_choi_unchecked(dim_in, dim_out, choi)
    }

    /// ρ ↦ tr(ρ)·σ.
    pub fn replacement(dim_in: usize, sigma: &DensityMatrix) -> Self {
        Self::from_choi_unchecked(
            dim_in,
            sigma.dim(),
            ComplexMatrix::identity(dim_in).kron(sigma.matrix()),
        )
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn choi(&self) -> &ComplexMatrix {
        &self.choi
    }

    pub fn unitary(&self) -> Option<&ComplexMatrix> {
        self.unitary.as_ref()
    }

    /// (−min Choi eigenvalue, max |tr_out C − I|).
    pub fn cptp_residuals(&self) -> (f64, f64) {
        let min_eig = hermitian_eig(&self.choi)
            .map(|s| s.eigenvalues[0])
            .unwrap_or(f64::NEG_INFINITY);
        let tr_out = trace_trailing(&self.choi, self.dim_in, self.dim_out);
        let tp = tr_out.max_abs_diff(&ComplexMatrix::identity(self.dim_in));
        ((-min_eig).max(0.0), tp)
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim_in {
            return Err(CombError::DimensionMismatch(format!(
                "channel input {} vs state {}",
                self.dim_in,
                rho.dim()
            )));
        }
        Ok(DensityMatrix::from_psd_unchecked(
            self.apply_matrix(rho.matrix()),
        ))
    }

    /// E(X) for an arbitrary operator X.
    pub fn apply_matrix(&self, x: &ComplexMatrix) -> ComplexMatrix {
        if let Some(u) = &self.unitary {
            return x.conjugate_by(u);
        }
        let (din, dout) = (self.dim_in, self.dim_out);
        let n = din * dout;
        let c = self.choi.data();
        let mut out = ComplexMatrix::zeros(dout, dout);
        for j in 0..din {
            for k in 0..din {
                let w = x[(j, k)];
                if w == ZERO {
                    continue;
                }
                for a in 0..dout {
                    let row = (j * dout + a) * n + k * dout;
                    for b in 0..dout {
                        out[(a, b)] += w * c[row + b];
                    }
                }
            }
        }
        out
    }

    /// Applies the channel to the subsystems `targets` of an operator on
    /// `dims`, identity elsewhere. Requires `dim_in == dim_out`.
    pub fn apply_to_subsystems(
        &self,
        x: &ComplexMatrix,
        dims: &[usize],
        targets: &[usize],
    ) -> Result<ComplexMatrix> {
        if self.dim_in != self.dim_out {
            return Err(CombError::DimensionMismatch(
                "subsystem application needs equal input and output dimensions".into(),
            ));
        }
        let tdim: usize = targets.iter().map(|&t| dims[t]).product();
        if tdim != self.dim_in {
            return Err(CombError::DimensionMismatch(format!(
                "targets {targets:?} of {dims:?} have dimension {tdim}, channel needs {}",
                self.dim_in
            )));
        }
        let rest: Vec<usize> = (0..dims.len()).filter(|k| !targets.contains(k)).collect();
        let perm: Vec<usize> = targets.iter().chain(&rest).copied().collect();
        let identity_perm = perm.iter().enumerate().all(|(i, &p)| i == p);
        let xp = if identity_perm {
            x.clone()
        } else {
            permute_subsystems(x, dims, &perm)?
        };
        let rdim: usize = rest.iter().map(|&k| dims[k]).product();
        let yp = self.apply_leading(&xp, rdim);
        if identity_perm {
            return Ok(yp);
        }
        let pdims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
        let mut inverse = vec![0usize; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        permute_subsystems(&yp, &pdims, &inverse)
    }

    /// (E ⊗ id_r)(X) where X acts on (in ⊗ r).
    fn apply_leading(&self, x: &ComplexMatrix, rdim: usize) -> ComplexMatrix {
        if let Some(u) = &self.unitary {
            return x.conjugate_by(&u.kron(&ComplexMatrix::identity(rdim)));
        }
        let (din, dout) = (self.dim_in, self.dim_out);
        let n = din * dout;
        let total_in = din * rdim;
        let total_out = dout * rdim;
        let c = self.choi.data();
        let xd = x.data();
        let mut out = ComplexMatrix::zeros(total_out, total_out);
        let od = out.data_mut();
        for j in 0..din {
            for k in 0..din {
                for xr in 0..rdim {
                    for yr in 0..rdim {
                        let w = xd[(j * rdim + xr) * total_in + k * rdim + yr];
                        if w == ZERO {
                            continue;
                        }
                        for a in 0..dout {
                            let crow = (j * dout + a) * n + k * dout;
                            let orow = (a * rdim + xr) * total_out + yr;
                            for b in 0..dout {
                                od[orow + b * rdim] += w * c[crow + b];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &QuantumChannel) -> Result<QuantumChannel> {
        if self.dim_out != other.dim_in {
            return Err(CombError::DimensionMismatch(
                "composition dimensions".into(),
            ));
        }
        if let (Some(a), Some(b)) = (&self.unitary, &other.unitary) {
            return Ok(Self::from_unitary_unchecked(&b.matmul(a)));
        }
        // (id ⊗ other) applied to the Choi of self
        let n_in = self.dim_in;
        let mut choi = ComplexMatrix::zeros(n_in * other.dim_out, n_in * other.dim_out);
        for j in 0..n_in {
            for k in 0..n_in {
                let block = ComplexMatrix::from_fn(self.dim_out, self.dim_out, |a, b| {
                    self.choi[(j * self.dim_out + a, k * self.dim_out + b)]
                });
                let img = other.apply_matrix(&block);
                for a in 0..other.dim_out {
                    for b in 0..other.dim_out {
                        choi[(j * other.dim_out + a, k * other.dim_out + b)] = img[(a, b)];
                    }
                }
            }
        }
        Ok(Self::from_choi_unchecked(n_in, other.dim_out, choi))
    }

    /// Kraus operators from the Choi spectrum (eigenvalues below 1e-13 dropped).
    pub fn kraus(&self) -> Vec<ComplexMatrix> {
        let spec = hermitian_eig(&self.choi).expect("Choi matrices are Hermitian");
        let (din, dout) = (self.dim_in, self.dim_out);
        let mut out = Vec::new();
        for k in (0..spec.dim()).rev() {
            let lam = spec.eigenvalues[k];
            if lam <= 1e-13 {
                continue;
            }
            let v = spec.vector(k);
            let s = lam.sqrt();
            out.push(ComplexMatrix::from_fn(dout, din, |a, j| {
                v[j * dout + a] * s
            }));
        }
        out
    }

    /// Stinespring isometry `in → out ⊗ env` with the requested environment
    /// dimension (must be at least the Kraus rank).
    pub fn stinespring(&self, env_dim: usize) -> Result<ComplexMatrix> {
        let kraus = self.kraus();
        if kraus.len() > env_dim {
            return Err(CombError::InvalidChannel(format!(
                "Kraus rank {} exceeds environment dimension {env_dim}",
                kraus.len()
            )));
        }
        let (din, dout) = (self.dim_in, self.dim_out);
        let mut v = ComplexMatrix::zeros(dout * env_dim, din);
        for (m, k) in kraus.iter().enumerate() {
            for a in 0..dout {
                for j in 0..din {
                    v[(a * env_dim + m, j)] = k[(a, j)];
                }
            }
        }
        Ok(v)
    }

    /// Max entry distance between Choi matrices.
    pub fn choi_distance(&self, other: &QuantumChannel) -> f64 {
        self.choi.max_abs_diff(&other.choi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_channel, random_density, rng_for};

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_fn(2, 2, |r, c| if r != c { C64::new(1.0, 0.0) } else { ZERO })
    }

    #[test]
    fn identity_and_unitary_channels() {
        let rho = DensityMatrix::from_diag(&[0.3, 0.7]).unwrap();
        let id = QuantumChannel::identity(2);
        assert!(id.apply(&rho).unwrap().matrix().max_abs_diff(rho.matrix()) < 1e-15);
        let x = QuantumChannel::from_unitary(&pauli_x()).unwrap();
        let out = x.apply(&rho).unwrap();
        assert!((out.matrix()[(0, 0)].re - 0.7).abs() < 1e-15);
        let (cp, tp) = x.cptp_residuals();
        assert!(cp < 1e-12 && tp < 1e-12);
    }

    #[test]
    fn choi_validation_rejects_non_tp() {
        // I/2 on C²⊗C² is the completely depolarizing channel; I itself doubles traces.
        let depolarizing = ComplexMatrix::identity(4).scale_real(0.5);
        assert!(QuantumChannel::from_choi(2, 2, depolarizing.clone()).is_ok());
        assert!(QuantumChannel::from_choi(2, 2, depolarizing.scale_real(2.0)).is_err());
    }

    #[test]
    fn replacement_channel() {
        let sigma = DensityMatrix::from_diag(&[0.8, 0.2]).unwrap();
        let ch = QuantumChannel::replacement(2, &sigma);
        let out = ch.apply(&DensityMatrix::basis(2, 1)).unwrap();
        assert!(out.matrix().max_abs_diff(sigma.matrix()) < 1e-15);
        assert!(QuantumChannel::from_choi(2, 2, ch.choi().clone()).is_ok());
    }

    #[test]
    fn kraus_round_trip_and_stinespring() {
        let mut rng = rng_for(3, 0);
        let ch = random_channel(2, 2, 3, &mut rng);
        let rebuilt = QuantumChannel::from_kraus(&ch.kraus()).unwrap();
        assert!(rebuilt.choi_distance(&ch) < 1e-12);
        let v = ch.stinespring(4).unwrap();
        let again = QuantumChannel::from_stinespring(&v, 2, 2).unwrap();
        assert!(again.choi_distance(&ch) < 1e-12);
    }

    #[test]
    fn subsystem_application_matches_kron() {
        let mut rng = rng_for(4, 0);
        let ch = random_channel(2, 2, 2, &mut rng);
        let a = random_density(2, &mut rng);
        let b = random_density(3, &mut rng);
        let joint = b.tensor(&a);
        let out = ch
            .apply_to_subsystems(joint.matrix(), &[3, 2], &[1])
            .unwrap();
        let expected = b.matrix().kron(ch.apply(&a).unwrap().matrix());
        assert!(out.max_abs_diff(&expected) < 1e-13);
        let out0 = ch
            .apply_to_subsystems(a.tensor(&b).matrix(), &[2, 3], &[0])
            .unwrap();
        let expected0 = ch.apply(&a).unwrap().matrix().kron(b.matrix());
        assert!(out0.max_abs_diff(&expected0) < 1e-13);
    }

    #[test]
    fn composition() {
        let mut rng = rng_for(5, 0);
        let a = random_channel(2, 2, 2, &mut rng);
        let b = random_channel(2, 2, 2, &mut rng);
        let rho = random_density(2, &mut rng);
        let direct = b.apply(&a.apply(&rho).unwrap()).unwrap();
        let composed = a.then(&b).unwrap().apply(&rho).unwrap();
        assert!(direct.matrix().max_abs_diff(composed.matrix()) < 1e-13);
    }
}
