//! Gibbs states, distillable work of states and channels, and the prefactors
//! of the non-Markovian work bounds. Boltzmann's constant is 1.

use serde::Serialize;

use crate::channel::QuantumChannel;
use crate::entropy::{rel_entropy, vn_entropy, ExtReal};
use crate::error::{CombError, Result};
use crate::linalg::{hermitian_eig, partial_trace, ComplexMatrix, TOL_HERM};
use crate::optim::{maximize_all, OptimizerConfig};
use crate::param::{params_from_state, state_from_params, state_len};
use crate::state::DensityMatrix;

/// Inputs whose channel work is within this of the best count as tied maximizers.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    matrix: ComplexMatrix,
}

impl Hamiltonian {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(CombError::DimensionMismatch(
                "Hamiltonian must be square".into(),
            ));
        }
        if !matrix.is_finite() {
            return Err(CombError::NonFinite);
        }
        let err = matrix.hermiticity_error();
        if err > TOL_HERM {
            return Err(CombError::NotHermitian(err));
        }
        Ok(Self {
            matrix: matrix.hermitian_part(),
        })
    }

    pub fn diagonal(energies: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_real_diag(energies))
    }

    /// `E|1⟩⟨1|` on a qubit.
    pub fn qubit(energy: f64) -> Result<Self> {
        Self::diagonal(&[0.0, energy])
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Diagonal entries (real parts).
    pub fn diag(&self) -> Vec<f64> {
        self.matrix.diag().iter().map(|z| z.re).collect()
    }
}

/// System Hamiltonian and temperature with the derived Gibbs data cached.
#[derive(Clone, Debug)]
pub struct ThermalContext {
    hamiltonian: Hamiltonian,
    temperature: f64,
    gibbs: DensityMatrix,
    log_gibbs: ComplexMatrix,
    gamma_min: f64,
}

impl ThermalContext {
    pub fn new(hamiltonian: Hamiltonian, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(CombError::Config(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        let spec = hermitian_eig(hamiltonian.matrix())?;
        let e0 = spec.eigenvalues[0];
        let weights: Vec<f64> = spec
            .eigenvalues
            .iter()
            .map(|&e| (-(e - e0) / temperature).exp())
            .collect();
        let z: f64 = weights.iter().sum();
        let ln_z = z.ln();
        let gibbs = spec.map(|e| (-(e - e0) / temperature).exp() / z);
        let log_gibbs = spec.map(|e| -(e - e0) / temperature - ln_z);
        let gamma_min = weights.iter().copied().fold(f64::INFINITY, f64::min) / z;
        if gamma_min.is_nan() || gamma_min <= 0.0 {
            return Err(CombError::Config(
                "Gibbs state is not full rank at this temperature".into(),
            ));
        }
        Ok(Self {
            hamiltonian,
            temperature,
            gibbs: DensityMatrix::from_psd_unchecked(gibbs),
            log_gibbs,
            gamma_min,
        })
    }

    /// Qubit with `H = E|1⟩⟨1|` at temperature `kT`.
    pub fn qubit(energy: f64, kt: f64) -> Result<Self> {
        Self::new(Hamiltonian::qubit(energy)?, kt)
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// kT (k = 1).
    pub fn kt(&self) -> f64 {
        self.temperature
    }

    pub fn gibbs(&self) -> &DensityMatrix {
        &self.gibbs
    }

    pub fn gamma_min(&self) -> f64 {
        self.gamma_min
    }

    /// S(Π_Emax||γ) = ln γ_min⁻¹.
    pub fn max_rel_entropy(&self) -> f64 {
        -self.gamma_min.ln()
    }

    /// kT·S(ρ||γ) for a system state, via −S(ρ) − tr ρ ln γ.
    pub fn work(&self, rho: &DensityMatrix) -> f64 {
        self.multi_work(rho, 1)
    }

    /// kT·S(ρ||γ^{⊗m}) for a state on `m` copies of the system.
    pub fn multi_work(&self, rho: &DensityMatrix, copies: usize) -> f64 {
        let d = self.dim();
        let cross: f64 = if copies == 1 {
            rho.expectation(&self.log_gibbs)
        } else {
            let dims = vec![d; copies];
            (0..copies)
                .map(|k| {
                    partial_trace(rho.matrix(), &dims, &[k])
                        .expect("copy dimensions match")
                        .trace_product(&self.log_gibbs)
                        .re
                })
                .sum()
        };
        (self.temperature * (-vn_entropy(rho) - cross)).max(0.0)
    }
}

/// A work value with the input achieving it (where applicable).
#[derive(Clone, Debug, Serialize)]
pub struct WorkValue {
    pub value: f64,
    #[serde(skip)]
    pub achiever: Option<DensityMatrix>,
    /// False when the optimizer hit its iteration cap on the winning restart.
    pub converged: bool,
}

impl WorkValue {
    pub fn exact(value: f64, achiever: Option<DensityMatrix>) -> Self {
        Self {
            value,
            achiever,
            converged: true,
        }
    }
}

pub fn gibbs_state(ctx: &ThermalContext) -> DensityMatrix {
    ctx.gibbs().clone()
}

/// Asymptotic work content kT·S(ρ||γ).
pub fn distillable_work(rho: &DensityMatrix, ctx: &ThermalContext) -> Result<WorkValue> {
    let s = rel_entropy(rho, ctx.gibbs())?;
    match s {
        ExtReal::Finite(v) => Ok(WorkValue::exact(ctx.kt() * v, Some(rho.clone()))),
        ExtReal::Infinite => Err(CombError::InvalidState(
            "Gibbs state lacks full support".into(),
        )),
    }
}

/// Structured starting states for searches over system inputs: γ, the
/// energy eigenstates and I/d.
pub fn structured_starts(ctx: &ThermalContext) -> Vec<DensityMatrix> {
    let d = ctx.dim();
    let spec = hermitian_eig(ctx.hamiltonian().matrix()).expect("Hamiltonian is Hermitian");
    let mut out = vec![ctx.gibbs().clone()];
    for k in 0..d {
        out.push(DensityMatrix::pure(&spec.vector(k)).expect("unit eigenvector"));
    }
    out.push(DensityMatrix::maximally_mixed(d));
    out
}

/// max_ρ W(E(ρ)) − W(ρ). Among inputs within [`TIE_TOL`] of the best value the
/// one with the least input work wins, then the lowest start index.
pub fn channel_work(
    ch: &QuantumChannel,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
) -> Result<WorkValue> {
    channel_work_seeded(ch, ctx, opt, &[], 0)
}

pub(crate) fn channel_work_seeded(
    ch: &QuantumChannel,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
    extra_seeds: &[DensityMatrix],
    stream: u64,
) -> Result<WorkValue> {
    let d = ctx.dim();
    if ch.dim_in() != d || ch.dim_out() != d {
        return Err(CombError::DimensionMismatch(format!(
            "channel {}->{} on a {d}-dimensional system",
            ch.dim_in(),
            ch.dim_out()
        )));
    }
    let objective = |x: &[f64]| {
        let rho = state_from_params(x, d);
        let out = DensityMatrix::from_psd_unchecked(ch.apply_matrix(rho.matrix()));
        ctx.work(&out) - ctx.work(&rho)
    };
    let seeds: Vec<Vec<f64>> = structured_starts(ctx)
        .iter()
        .chain(extra_seeds)
        .map(params_from_state)
        .collect();
    let runs = maximize_all(&objective, state_len(d), &seeds, opt, stream);
    let best = runs
        .iter()
        .map(|r| r.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut pick: Option<(f64, usize)> = None;
    for (i, r) in runs.iter().enumerate() {
        if r.value < best - TIE_TOL {
            continue;
        }
        let w_in = ctx.work(&state_from_params(&r.x, d));
        if pick.is_none_or(|(w, _)| w_in < w - TIE_TOL) {
            pick = Some((w_in, i));
        }
    }
    let (_, i) = pick.expect("at least one restart");
    let rho = state_from_params(&runs[i].x, d);
    Ok(WorkValue {
        value: runs[i].value,
        achiever: Some(rho),
        converged: runs[i].converged,
    })
}

/// Maximum single-copy work content kT·ln γ_min⁻¹.
pub fn f_max(ctx: &ThermalContext) -> f64 {
    ctx.kt() * ctx.max_rel_entropy()
}

/// 2^{1/4}[√2 ln 2 + S(Π_Emax||γ)](n − 1).
pub fn thm1_prefactor(ctx: &ThermalContext, n: usize) -> f64 {
    let base = 2f64.sqrt() * 2f64.ln() + ctx.max_rel_entropy();
    2f64.powf(0.25) * base * n.saturating_sub(1) as f64
}

/// 2^{1/4}[√2 ln 2 + (2n − 1)S(Π_Emax||γ)].
pub fn thm3_prefactor(ctx: &ThermalContext, n: usize) -> f64 {
    let m = (2 * n.max(1) - 1) as f64;
    2f64.powf(0.25) * (2f64.sqrt() * 2f64.ln() + m * ctx.max_rel_entropy())
}

/// Both sides of the continuity bound
/// |S(ρ₁||σ) − S(ρ₂||σ)| ≤ 2^{1/4}(ln 2 + ln m̃⁻¹/√2)(√S(ρ₁||τ) + √S(ρ₂||τ))^{1/2}
/// with m̃ the smallest eigenvalue of σ.
pub fn lemma_s2_bound(
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    sigma: &DensityMatrix,
    tau: &DensityMatrix,
) -> Result<(f64, ExtReal)> {
    let spec = hermitian_eig(sigma.matrix())?;
    let m = spec.eigenvalues[0];
    if m <= 0.0 {
        return Err(CombError::InvalidState("σ must be full rank".into()));
    }
    let s1 = rel_entropy(rho1, sigma)?.to_f64();
    let s2 = rel_entropy(rho2, sigma)?.to_f64();
    let lhs = (s1 - s2).abs();
    let t1 = rel_entropy(rho1, tau)?;
    let t2 = rel_entropy(rho2, tau)?;
    let rhs = match (t1, t2) {
        (ExtReal::Finite(a), ExtReal::Finite(b)) => {
            let pref = 2f64.powf(0.25) * (2f64.ln() + (-m.ln()) / 2f64.sqrt());
            ExtReal::Finite(pref * (a.sqrt() + b.sqrt()).sqrt())
        }
        _ => ExtReal::Infinite,
    };
    Ok((lhs, rhs))
}
