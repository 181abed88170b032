//! Process tensors (quantum combs), their dilations, and control combs.
//!
//! The Choi matrix of an n-step process acts on the spaces
//! `(i₁, o₁, …, iₙ, oₙ)` in that order, with channel Choi convention
//! `C = Σ |j⟩⟨k| ⊗ E(|j⟩⟨k|)`.

use crate::channel::QuantumChannel;
use crate::error::{CombError, Result};
use crate::linalg::{hermitian_eig, partial_trace, permute_subsystems, ComplexMatrix, C64, ZERO};
use crate::link::{input_label, output_label, Label, LabeledOp};
use crate::state::DensityMatrix;

/// Tolerance on each recursive causality condition.
pub const TOL_COMB: f64 = 1e-8;
/// Tolerance on negative Choi eigenvalues, relative to the largest entry.
pub const TOL_COMB_PSD: f64 = 1e-10;
/// Tolerance on unitarity of dilation gates.
pub const TOL_UNITARY: f64 = 1e-10;

const ENV_LABEL_BASE: Label = 1 << 20;
const ANC_LABEL_BASE: Label = 1 << 21;

fn env_label(k: usize) -> Label {
    ENV_LABEL_BASE + k as Label
}

fn anc_label(k: usize) -> Label {
    ANC_LABEL_BASE + k as Label
}

/// Environment state and per-step system–environment unitaries (system factor first).
#[derive(Clone, Debug)]
pub struct Dilation {
    env_init: DensityMatrix,
    step_unitaries: Vec<ComplexMatrix>,
}

impl Dilation {
    pub fn new(env_init: DensityMatrix, step_unitaries: Vec<ComplexMatrix>) -> Result<Self> {
        let de = env_init.dim();
        for (k, u) in step_unitaries.iter().enumerate() {
            if !u.is_square() || u.rows() % de != 0 {
                return Err(CombError::InvalidDilation(format!(
                    "step {} unitary is {}x{} with environment dimension {de}",
                    k + 1,
                    u.rows(),
                    u.cols()
                )));
            }
            let err = u
                .adjoint()
                .matmul(u)
                .max_abs_diff(&ComplexMatrix::identity(u.rows()));
            if err > TOL_UNITARY {
                return Err(CombError::InvalidDilation(format!(
                    "step {} gate is not unitary ({err:.3e})",
                    k + 1
                )));
            }
        }
        if step_unitaries
            .windows(2)
            .any(|w| w[0].rows() != w[1].rows())
        {
            return Err(CombError::InvalidDilation(
                "step gates differ in dimension".into(),
            ));
        }
        Ok(Self {
            env_init,
            step_unitaries,
        })
    }

    pub fn env_dim(&self) -> usize {
        self.env_init.dim()
    }

    pub fn env_init(&self) -> &DensityMatrix {
        &self.env_init
    }

    pub fn step_unitaries(&self) -> &[ComplexMatrix] {
        &self.step_unitaries
    }

    /// System dimension implied by the gates (`None` without steps).
    pub fn sys_dim(&self) -> Option<usize> {
        self.step_unitaries
            .first()
            .map(|u| u.rows() / self.env_dim())
    }
}

/// An n-step quantum comb with an optional dilation.
#[derive(Clone, Debug)]
pub struct ProcessTensor {
    steps: usize,
    sys_dim: usize,
    choi: ComplexMatrix,
    dilation: Option<Dilation>,
}

/// Outcome of the causality and positivity checks.
#[derive(Clone, Debug, PartialEq)]
pub struct CombReport {
    pub passed: bool,
    pub min_eigenvalue: f64,
    pub hermiticity: f64,
    /// Residual of level k at index k − 1.
    pub level_residuals: Vec<f64>,
    /// First failing level; 0 denotes the positivity/Hermiticity check.
    pub failed_level: Option<usize>,
}

impl CombReport {
    pub fn max_residual(&self) -> f64 {
        self.level_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn into_result(self) -> Result<()> {
        match self.failed_level {
            None => Ok(()),
            Some(0) => Err(CombError::CombInvalid {
                level: 0,
                residual: (-self.min_eigenvalue).max(self.hermiticity),
            }),
            Some(level) => Err(CombError::CombInvalid {
                level,
                residual: self.level_residuals[level - 1],
            }),
        }
    }
}

impl ProcessTensor {
    /// Validating constructor from a comb Choi matrix.
    pub fn from_choi(steps: usize, sys_dim: usize, choi: ComplexMatrix) -> Result<Self> {
        let p = Self::from_choi_unchecked(steps, sys_dim, choi)?;
        validate_comb(&p).into_result()?;
        Ok(p)
    }

    pub(crate) fn from_choi_unchecked(
        steps: usize,
        sys_dim: usize,
        choi: ComplexMatrix,
    ) -> Result<Self> {
        let total = sys_dim.pow(2 * steps as u32);
        if steps == 0 || sys_dim == 0 || !choi.is_square() || choi.rows() != total {
            return Err(CombError::DimensionMismatch(format!(
                "{}x{} Choi matrix for {steps} steps of dimension {sys_dim}",
                choi.rows(),
                choi.cols()
            )));
        }
        if !choi.is_finite() {
            return Err(CombError::NonFinite);
        }
        Ok(Self {
            steps,
            sys_dim,
            choi,
            dilation: None,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn sys_dim(&self) -> usize {
        self.sys_dim
    }

    pub fn choi(&self) -> &ComplexMatrix {
        &self.choi
    }

    pub fn dilation(&self) -> Option<&Dilation> {
        self.dilation.as_ref()
    }

    /// Drops the dilation so every contraction uses the Choi matrix.
    pub fn without_dilation(&self) -> Self {
        Self {
            dilation: None,
            ..self.clone()
        }
    }

    fn space_dims(&self) -> Vec<usize> {
        vec![self.sys_dim; 2 * self.steps]
    }

    fn labeled(&self) -> LabeledOp {
        let spaces = (0..self.steps)
            .flat_map(|k| {
                [
                    (input_label(k), self.sys_dim),
                    (output_label(k), self.sys_dim),
                ]
            })
            .collect();
        LabeledOp::new(spaces, self.choi.clone()).expect("comb shape checked on construction")
    }
}

/// Assembles the comb Choi matrix by threading the environment through every step.
pub fn build_from_dilation(dil: &Dilation, n: usize, sys_dim: usize) -> Result<ProcessTensor> {
    if dil.step_unitaries.len() != n || n == 0 {
        return Err(CombError::InvalidDilation(format!(
            "{} step gates for {n} steps",
            dil.step_unitaries.len()
        )));
    }
    let de = dil.env_dim();
    if dil.sys_dim() != Some(sys_dim) {
        return Err(CombError::InvalidDilation(format!(
            "gates of dimension {} do not factor as {sys_dim}x{de}",
            dil.step_unitaries[0].rows()
        )));
    }
    let d = sys_dim;
    let mut acc = LabeledOp::new(vec![(env_label(0), de)], dil.env_init.matrix().clone())?;
    for (k, u) in dil.step_unitaries.iter().enumerate() {
        let gate = LabeledOp::new(
            vec![
                (input_label(k), d),
                (env_label(k), de),
                (output_label(k), d),
                (env_label(k + 1), de),
            ],
            QuantumChannel::from_unitary_unchecked(u).choi().clone(),
        )?;
        acc = acc.link(&gate)?;
    }
    let acc = acc.trace_out(&[env_label(n)])?;
    let order: Vec<Label> = (0..n)
        .flat_map(|k| [input_label(k), output_label(k)])
        .collect();
    let choi = acc.reorder(&order)?.into_op().hermitian_part();
    let mut p = ProcessTensor::from_choi_unchecked(n, d, choi)?;
    p.dilation = Some(dil.clone());
    Ok(p)
}

/// Checks positivity and the recursive conditions
/// `tr_{o_k} C⁽ᵏ⁾ = C⁽ᵏ⁻¹⁾ ⊗ I_{i_k}` with `C⁽ᵏ⁻¹⁾ = tr_{i_k o_k} C⁽ᵏ⁾ / d` and `C⁽⁰⁾ = 1`.
pub fn validate_comb(p: &ProcessTensor) -> CombReport {
    let d = p.sys_dim;
    let hermiticity = p.choi.hermiticity_error();
    let scale = p.choi.max_abs().max(1.0);
    let min_eigenvalue = hermitian_eig(&p.choi.hermitian_part())
        .map(|s| s.eigenvalues[0])
        .unwrap_or(f64::NEG_INFINITY);
    let psd_ok = hermiticity <= 1e-10 * scale && min_eigenvalue >= -TOL_COMB_PSD * scale;

    let mut residuals = vec![0.0; p.steps];
    let mut current = p.choi.clone();
    for k in (1..=p.steps).rev() {
        let keep_dim = d.pow(2 * k as u32 - 1);
        let traced = crate::linalg::trace_trailing(&current, keep_dim, d);
        let prev = if k > 1 {
            crate::linalg::trace_trailing(&traced, keep_dim / d, d).scale_real(1.0 / d as f64)
        } else {
            ComplexMatrix::identity(1)
        };
        let expected = prev.kron(&ComplexMatrix::identity(d));
        residuals[k - 1] = traced.max_abs_diff(&expected);
        current = prev;
    }
    let failed_level = if !psd_ok {
        Some(0)
    } else {
        residuals
            .iter()
            .position(|&r| r.is_nan() || r > TOL_COMB)
            .map(|k| k + 1)
    };
    CombReport {
        passed: failed_level.is_none(),
        min_eigenvalue,
        hermiticity,
        level_residuals: residuals,
        failed_level,
    }
}

fn check_step(p: &ProcessTensor, i: usize, prefix: &[DensityMatrix]) -> Result<()> {
    if i == 0 || i > p.steps {
        return Err(CombError::InvalidStep {
            index: i,
            steps: p.steps,
        });
    }
    if prefix.len() != i - 1 {
        return Err(CombError::BadPrefix {
            step: i,
            got: prefix.len(),
            need: i - 1,
        });
    }
    for rho in prefix {
        if rho.dim() != p.sys_dim {
            return Err(CombError::DimensionMismatch(format!(
                "prefix state of dimension {} for a {}-dimensional system",
                rho.dim(),
                p.sys_dim
            )));
        }
    }
    Ok(())
}

/// Environment state after feeding `prefix` through the first steps of a dilation.
fn env_after_prefix(dil: &Dilation, d: usize, prefix: &[DensityMatrix]) -> ComplexMatrix {
    let de = dil.env_dim();
    let mut env = dil.env_init.matrix().clone();
    for (rho, u) in prefix.iter().zip(&dil.step_unitaries) {
        let joint = rho.matrix().kron(&env).conjugate_by(u);
        env = crate::linalg::trace_leading(&joint, d, de);
    }
    env
}

/// The channel of step `i` (1-based) given the inputs fed at steps `1..i`.
pub fn conditional_channel(
    p: &ProcessTensor,
    i: usize,
    prefix: &[DensityMatrix],
) -> Result<QuantumChannel> {
    check_step(p, i, prefix)?;
    let d = p.sys_dim;
    if let Some(dil) = &p.dilation {
        let de = dil.env_dim();
        let env = env_after_prefix(dil, d, prefix);
        let u = &dil.step_unitaries[i - 1];
        let mut choi = ComplexMatrix::zeros(d * d, d * d);
        for j in 0..d {
            for k in 0..d {
                let mut unit = ComplexMatrix::zeros(d, d);
                unit[(j, k)] = crate::linalg::ONE;
                let img = crate::linalg::trace_trailing(&unit.kron(&env).conjugate_by(u), d, de);
                for a in 0..d {
                    for b in 0..d {
                        choi[(j * d + a, k * d + b)] = img[(a, b)];
                    }
                }
            }
        }
        return Ok(QuantumChannel::from_choi_unchecked(d, d, choi));
    }
    let mut acc = p.labeled();
    for k in (i..p.steps).rev() {
        acc = acc.trace_out(&[input_label(k), output_label(k)])?;
        acc = LabeledOp::new(acc.spaces().to_vec(), acc.op().scale_real(1.0 / d as f64))?;
    }
    for (k, rho) in prefix.iter().enumerate() {
        let state = LabeledOp::new(vec![(input_label(k), d)], rho.matrix().clone())?;
        acc = state.link(&acc)?.trace_out(&[output_label(k)])?;
    }
    let acc = acc.reorder(&[input_label(i - 1), output_label(i - 1)])?;
    Ok(QuantumChannel::from_choi_unchecked(d, d, acc.into_op()))
}

/// What happens to the ancilla after the last step of a control comb.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AncillaPolicy {
    /// Return only the final system state.
    Discard,
    /// Return the final system ⊗ ancilla state.
    Keep,
    /// The ancilla holds the earlier outputs; return `o₁ ⊗ … ⊗ oₙ`.
    StoredOutputs,
}

/// Experimenter-side comb: an initial system–ancilla state and the channels
/// applied to system and ancilla between consecutive process steps.
#[derive(Clone, Debug)]
pub struct ControlComb {
    ancilla_dim: usize,
    init_state: DensityMatrix,
    link_channels: Vec<QuantumChannel>,
    policy: AncillaPolicy,
}

impl ControlComb {
    pub fn new(
        ancilla_dim: usize,
        init_state: DensityMatrix,
        link_channels: Vec<QuantumChannel>,
        policy: AncillaPolicy,
    ) -> Result<Self> {
        if ancilla_dim == 0 || !init_state.dim().is_multiple_of(ancilla_dim) {
            return Err(CombError::DimensionMismatch(format!(
                "initial state of dimension {} with ancilla dimension {ancilla_dim}",
                init_state.dim()
            )));
        }
        let joint = init_state.dim();
        for ch in &link_channels {
            if ch.dim_in() != joint || ch.dim_out() != joint {
                return Err(CombError::DimensionMismatch(format!(
                    "link channel {}->{} for a {joint}-dimensional system+ancilla",
                    ch.dim_in(),
                    ch.dim_out()
                )));
            }
        }
        Ok(Self {
            ancilla_dim,
            init_state,
            link_channels,
            policy,
        })
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_dim
    }

    pub fn sys_dim(&self) -> usize {
        self.init_state.dim() / self.ancilla_dim
    }

    pub fn init_state(&self) -> &DensityMatrix {
        &self.init_state
    }

    pub fn link_channels(&self) -> &[QuantumChannel] {
        &self.link_channels
    }

    pub fn policy(&self) -> AncillaPolicy {
        self.policy
    }

    /// Number of process steps this comb interleaves with.
    pub fn steps(&self) -> usize {
        self.link_channels.len() + 1
    }
}

/// Final state 𝒫(𝒮) of a process under a control comb.
pub fn apply_control_comb(p: &ProcessTensor, s: &ControlComb) -> Result<DensityMatrix> {
    let d = p.sys_dim;
    if s.sys_dim() != d || s.steps() != p.steps {
        return Err(CombError::DimensionMismatch(format!(
            "{}-step control comb on a {}-dimensional system for a {}-step process of dimension {d}",
            s.steps(),
            s.sys_dim(),
            p.steps
        )));
    }
    let da = s.ancilla_dim;
    if s.policy == AncillaPolicy::StoredOutputs && da != d.pow(p.steps as u32 - 1) {
        return Err(CombError::DimensionMismatch(
            "stored-output combs need one system-sized register per earlier step".into(),
        ));
    }
    let joint = if let Some(dil) = &p.dilation {
        let de = dil.env_dim();
        let dims = [d, da, de];
        let mut x = s.init_state.matrix().kron(dil.env_init.matrix());
        for (k, u) in dil.step_unitaries.iter().enumerate() {
            x = QuantumChannel::from_unitary_unchecked(u).apply_to_subsystems(
                &x,
                &dims,
                &[0, 2],
            )?;
            if let Some(link) = s.link_channels.get(k) {
                x = link.apply_to_subsystems(&x, &dims, &[0, 1])?;
            }
        }
        crate::linalg::trace_trailing(&x, d * da, de)
    } else {
        let mut acc = LabeledOp::new(
            vec![(input_label(0), d), (anc_label(0), da)],
            s.init_state.matrix().clone(),
        )?
        .link(&p.labeled())?;
        for (k, link) in s.link_channels.iter().enumerate() {
            let l = LabeledOp::new(
                vec![
                    (output_label(k), d),
                    (anc_label(k), da),
                    (input_label(k + 1), d),
                    (anc_label(k + 1), da),
                ],
                link.choi().clone(),
            )?;
            acc = acc.link(&l)?;
        }
        let last = p.steps - 1;
        acc.reorder(&[output_label(last), anc_label(last)])?
            .into_op()
    };
    let out = match s.policy {
        AncillaPolicy::Discard => crate::linalg::trace_trailing(&joint, d, da),
        AncillaPolicy::Keep => joint,
        AncillaPolicy::StoredOutputs => {
            let n = p.steps;
            let perm: Vec<usize> = (1..n).chain([0]).collect();
            permute_subsystems(&joint, &vec![d; n], &perm)?
        }
    };
    Ok(DensityMatrix::from_psd_unchecked(out))
}

/// Inputs `r = (ρ₁, …, ρₙ)` fed to the steps of a process.
#[derive(Clone, Debug, PartialEq)]
pub struct InputVector {
    pub states: Vec<DensityMatrix>,
}

impl InputVector {
    pub fn new(states: Vec<DensityMatrix>) -> Result<Self> {
        if let Some(first) = states.first() {
            if states.iter().any(|s| s.dim() != first.dim()) {
                return Err(CombError::DimensionMismatch(
                    "input states differ in dimension".into(),
                ));
            }
        }
        Ok(Self { states })
    }

    pub fn uniform(state: &DensityMatrix, n: usize) -> Self {
        Self {
            states: vec![state.clone(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Comb feeding `ρᵢ` at step i and discarding every output but the last.
pub fn product_input_comb(r: &InputVector) -> Result<ControlComb> {
    let first = r
        .states
        .first()
        .ok_or_else(|| CombError::DimensionMismatch("empty input vector".into()))?;
    let d = first.dim();
    let links = r.states[1..]
        .iter()
        .map(|rho| QuantumChannel::replacement(d, rho))
        .collect();
    ControlComb::new(1, first.clone(), links, AncillaPolicy::Discard)
}

/// Comb feeding `ρᵢ` at step i and swapping each output into its own register,
/// so the final state is the joint output `o₁ ⊗ … ⊗ oₙ`.
pub fn global_storage(r: &InputVector) -> Result<ControlComb> {
    let first = r
        .states
        .first()
        .ok_or_else(|| CombError::DimensionMismatch("empty input vector".into()))?;
    let d = first.dim();
    let n = r.len();
    let registers = n - 1;
    let da = d.pow(registers as u32);
    let blank = DensityMatrix::basis(d, 0);
    let init = DensityMatrix::tensor_all(
        std::iter::once(first).chain(std::iter::repeat_n(&blank, registers)),
    );
    let dims = vec![d; n];
    let mut links = Vec::with_capacity(registers);
    for (k, rho) in r.states[1..].iter().enumerate() {
        // system is factor 0, register k is factor k + 1
        let keep: Vec<usize> = (0..n).filter(|&f| f != k + 1).collect();
        let mut perm: Vec<usize> = (1..k + 1).collect();
        perm.push(0);
        perm.extend(k + 1..n - 1);
        let ch = QuantumChannel::from_linear_map(d * da, d * da, |x| {
            let reduced = partial_trace(x, &dims, &keep).expect("register dims");
            let stored = permute_subsystems(&reduced, &dims[1..], &perm).expect("register dims");
            rho.matrix().kron(&stored)
        })?;
        links.push(ch);
    }
    ControlComb::new(da, init, links, AncillaPolicy::StoredOutputs)
}

/// Pure-state propagation through a dilation: the environment state split into
/// its eigenbranches, each carried as a vector on system ⊗ ancilla ⊗ environment.
/// Used for control combs made of a pure initial state and unitary links.
#[derive(Clone, Debug)]
pub(crate) struct DilationBranches {
    d: usize,
    de: usize,
    branches: Vec<(f64, Vec<C64>)>,
    steps: Vec<ComplexMatrix>,
}

impl DilationBranches {
    pub(crate) fn new(dil: &Dilation, d: usize) -> Self {
        let spec = hermitian_eig(dil.env_init.matrix()).expect("density matrices are Hermitian");
        let branches = (0..spec.dim())
            .filter(|&k| spec.eigenvalues[k] > 1e-15)
            .map(|k| (spec.eigenvalues[k], spec.vector(k)))
            .collect();
        Self {
            d,
            de: dil.env_dim(),
            branches,
            steps: dil.step_unitaries.clone(),
        }
    }

    /// Final system ⊗ ancilla state for initial vector `psi` on (S, A) and
    /// unitary links on (S, A).
    pub(crate) fn output(&self, psi: &[C64], links: &[ComplexMatrix], da: usize) -> ComplexMatrix {
        let (d, de) = (self.d, self.de);
        let dj = d * da;
        let total = dj * de;
        let mut out = ComplexMatrix::zeros(dj, dj);
        let mut w = vec![ZERO; d * de.max(da)];
        for (p, e) in &self.branches {
            let mut v: Vec<C64> = psi
                .iter()
                .flat_map(|&x| e.iter().map(move |&y| x * y))
                .collect();
            for (k, u) in self.steps.iter().enumerate() {
                // U on (S, E) for every ancilla index
                for a in 0..da {
                    for s in 0..d {
                        for m in 0..de {
                            w[s * de + m] = v[(s * da + a) * de + m];
                        }
                    }
                    let y = u.mul_vec(&w[..d * de]);
                    for s in 0..d {
                        for m in 0..de {
                            v[(s * da + a) * de + m] = y[s * de + m];
                        }
                    }
                }
                if let Some(l) = links.get(k) {
                    for m in 0..de {
                        for r in 0..dj {
                            w[r] = v[r * de + m];
                        }
                        let y = l.mul_vec(&w[..dj]);
                        for r in 0..dj {
                            v[r * de + m] = y[r];
                        }
                    }
                }
            }
            debug_assert_eq!(v.len(), total);
            let od = out.data_mut();
            for r in 0..dj {
                for c in 0..dj {
                    let mut acc = ZERO;
                    for m in 0..de {
                        acc += v[r * de + m] * v[c * de + m].conj();
                    }
                    od[r * dj + c] += acc * *p;
                }
            }
        }
        out
    }
}

/// The linear map `ρ₁ ⊗ … ⊗ ρₙ ↦ 𝒫(𝒮_r)` with the Choi matrix regrouped as
/// (all inputs, all outputs); built once and reused inside optimizations.
#[derive(Clone, Debug)]
pub struct OutputMap {
    steps: usize,
    sys_dim: usize,
    grouped: ComplexMatrix,
}

impl OutputMap {
    pub fn new(p: &ProcessTensor) -> Self {
        let n = p.steps;
        let perm: Vec<usize> = (0..n)
            .map(|k| 2 * k)
            .chain((0..n).map(|k| 2 * k + 1))
            .collect();
        let grouped = if n == 1 {
            p.choi.clone()
        } else {
            permute_subsystems(&p.choi, &p.space_dims(), &perm).expect("comb dims")
        };
        Self {
            steps: n,
            sys_dim: p.sys_dim,
            grouped,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn sys_dim(&self) -> usize {
        self.sys_dim
    }

    /// Image of an arbitrary operator on the joint input space.
    pub fn apply_matrix(&self, rho_in: &ComplexMatrix) -> ComplexMatrix {
        let x = self.sys_dim.pow(self.steps as u32);
        let y = x;
        let rd = rho_in.data();
        let cd = self.grouped.data();
        let mut out = ComplexMatrix::zeros(y, y);
        let od = out.data_mut();
        let nn = x * y;
        // out[y,y'] = Σ_{x,x'} ρ[x,x'] C[(x,y),(x',y')]
        for xi in 0..x {
            for xj in 0..x {
                let w = rd[xi * x + xj];
                if w == crate::linalg::ZERO {
                    continue;
                }
                for yi in 0..y {
                    let row = (xi * y + yi) * nn + xj * y;
                    let orow = yi * y;
                    for yj in 0..y {
                        od[orow + yj] += w * cd[row + yj];
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, states: &[DensityMatrix]) -> DensityMatrix {
        let rho_in = DensityMatrix::tensor_all(states);
        DensityMatrix::from_psd_unchecked(self.apply_matrix(rho_in.matrix()))
    }
}

/// Joint output `𝒫(𝒮_r)` on `o₁ ⊗ … ⊗ oₙ` for product inputs, from the Choi matrix.
pub fn global_output(p: &ProcessTensor, r: &InputVector) -> Result<DensityMatrix> {
    if r.len() != p.steps || r.states.iter().any(|s| s.dim() != p.sys_dim) {
        return Err(CombError::DimensionMismatch(format!(
            "{} inputs for a {}-step process",
            r.len(),
            p.steps
        )));
    }
    Ok(OutputMap::new(p).apply(&r.states))
}

/// Output of step `i` (1-based) for product inputs: the i-th marginal of the joint output.
pub fn step_output(p: &ProcessTensor, r: &InputVector, i: usize) -> Result<DensityMatrix> {
    let joint = global_output(p, r)?;
    joint.partial_trace(&vec![p.sys_dim; p.steps], &[i - 1])
}

/// Process made of independent channels, one per step.
pub fn markov_product(channels: &[QuantumChannel]) -> Result<ProcessTensor> {
    let first = channels
        .first()
        .ok_or_else(|| CombError::DimensionMismatch("no channels".into()))?;
    let d = first.dim_in();
    if channels.iter().any(|c| c.dim_in() != d || c.dim_out() != d) {
        return Err(CombError::DimensionMismatch(
            "Markovian product needs channels on one system dimension".into(),
        ));
    }
    let choi = crate::linalg::tensor_all(channels.iter().map(|c| c.choi()));
    ProcessTensor::from_choi_unchecked(channels.len(), d, choi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{C64, ZERO};
    use crate::random::{random_channel, random_density, random_unitary, rng_for};

    fn x_gate() -> ComplexMatrix {
        ComplexMatrix::from_fn(2, 2, |r, c| if r != c { C64::new(1.0, 0.0) } else { ZERO })
    }

    fn swap() -> ComplexMatrix {
        let p = crate::linalg::permutation_map(&[2, 2], &[1, 0]);
        ComplexMatrix::from_fn(
            4,
            4,
            |r, c| if p[r] == c { C64::new(1.0, 0.0) } else { ZERO },
        )
    }

    fn random_dilation_process(seed: u64, n: usize, de: usize) -> ProcessTensor {
        let mut rng = rng_for(seed, 0);
        let env = random_density(de, &mut rng);
        let us = (0..n).map(|_| random_unitary(2 * de, &mut rng)).collect();
        build_from_dilation(&Dilation::new(env, us).unwrap(), n, 2).unwrap()
    }

    #[test]
    fn trivial_environment_gives_identity_channels() {
        let dil = Dilation::new(
            DensityMatrix::basis(1, 0),
            vec![ComplexMatrix::identity(2); 3],
        )
        .unwrap();
        let p = build_from_dilation(&dil, 3, 2).unwrap();
        let ids = markov_product(&vec![QuantumChannel::identity(2); 3]).unwrap();
        assert!(p.choi().max_abs_diff(ids.choi()) < 1e-14);
        let rep = validate_comb(&p);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn dilation_outputs_are_valid_combs() {
        for seed in 0..5 {
            let p = random_dilation_process(seed, 2 + (seed as usize % 2), 2);
            let rep = validate_comb(&p);
            assert!(rep.passed, "{rep:?}");
            assert!(rep.max_residual() < 1e-8);
        }
    }

    #[test]
    fn scaled_and_signalling_combs_fail() {
        let p = random_dilation_process(7, 2, 2);
        let scaled = ProcessTensor::from_choi_unchecked(2, 2, p.choi().scale_real(2.0)).unwrap();
        assert_eq!(validate_comb(&scaled).failed_level, Some(1));
        // exchanging o₁ and i₂ lets the first output reach the second input
        let swapped = permute_subsystems(p.choi(), &[2; 4], &[0, 2, 1, 3]).unwrap();
        let bad = ProcessTensor::from_choi_unchecked(2, 2, swapped).unwrap();
        let rep = validate_comb(&bad);
        assert!(!rep.passed);
        assert!(matches!(
            ProcessTensor::from_choi(2, 2, bad.choi().clone()),
            Err(CombError::CombInvalid { .. })
        ));
    }

    #[test]
    fn conditional_channels_agree_between_paths() {
        let mut rng = rng_for(8, 1);
        for seed in 0..4 {
            let p = random_dilation_process(seed + 10, 3, 2);
            let q = p.without_dilation();
            for i in 1..=3 {
                let prefix: Vec<_> = (1..i).map(|_| random_density(2, &mut rng)).collect();
                let a = conditional_channel(&p, i, &prefix).unwrap();
                let b = conditional_channel(&q, i, &prefix).unwrap();
                assert!(a.choi_distance(&b) < 1e-10);
                let (cp, tp) = a.cptp_residuals();
                assert!(cp < 1e-10 && tp < 1e-10);
            }
        }
    }

    #[test]
    fn conditional_channel_errors() {
        let p = random_dilation_process(3, 2, 2);
        assert!(matches!(
            conditional_channel(&p, 0, &[]),
            Err(CombError::InvalidStep { .. })
        ));
        assert!(matches!(
            conditional_channel(&p, 3, &[]),
            Err(CombError::InvalidStep { .. })
        ));
        assert!(matches!(
            conditional_channel(&p, 2, &[]),
            Err(CombError::BadPrefix { .. })
        ));
    }

    #[test]
    fn markov_product_is_prefix_independent() {
        let mut rng = rng_for(9, 0);
        let a = random_channel(2, 2, 2, &mut rng);
        let b = random_channel(2, 2, 3, &mut rng);
        let p = markov_product(&[a.clone(), b.clone()]).unwrap();
        assert!(validate_comb(&p).passed);
        assert!(conditional_channel(&p, 1, &[]).unwrap().choi_distance(&a) < 1e-12);
        for _ in 0..20 {
            let rho = random_density(2, &mut rng);
            assert!(
                conditional_channel(&p, 2, &[rho])
                    .unwrap()
                    .choi_distance(&b)
                    < 1e-9
            );
        }
    }

    #[test]
    fn control_comb_on_markov_product_composes_channels() {
        let mut rng = rng_for(10, 0);
        let a = random_channel(2, 2, 2, &mut rng);
        let b = random_channel(2, 2, 2, &mut rng);
        let e = random_channel(2, 2, 2, &mut rng);
        let p = markov_product(&[a.clone(), b.clone()]).unwrap();
        let rho = random_density(2, &mut rng);
        let s = ControlComb::new(1, rho.clone(), vec![e.clone()], AncillaPolicy::Discard).unwrap();
        let out = apply_control_comb(&p, &s).unwrap();
        let expected = b.apply(&e.apply(&a.apply(&rho).unwrap()).unwrap()).unwrap();
        assert!(out.matrix().max_abs_diff(expected.matrix()) < 1e-12);
    }

    #[test]
    fn global_storage_marginals_match_conditional_channels() {
        let mut rng = rng_for(11, 0);
        for seed in 0..3 {
            let p = random_dilation_process(seed + 20, 2, 2);
            let r =
                InputVector::new((0..2).map(|_| random_density(2, &mut rng)).collect()).unwrap();
            let s = global_storage(&r).unwrap();
            let via_dilation = apply_control_comb(&p, &s).unwrap();
            let via_choi = apply_control_comb(&p.without_dilation(), &s).unwrap();
            let direct = global_output(&p, &r).unwrap();
            assert!(via_dilation.matrix().max_abs_diff(direct.matrix()) < 1e-10);
            assert!(via_choi.matrix().max_abs_diff(direct.matrix()) < 1e-10);
            for i in 1..=2 {
                let ch = conditional_channel(&p, i, &r.states[..i - 1]).unwrap();
                let expected = ch.apply(&r.states[i - 1]).unwrap();
                let marginal = step_output(&p, &r, i).unwrap();
                assert!(marginal.matrix().max_abs_diff(expected.matrix()) < 1e-8);
            }
        }
    }

    #[test]
    fn three_step_global_storage() {
        let mut rng = rng_for(12, 0);
        let p = random_dilation_process(30, 3, 2);
        let r = InputVector::new((0..3).map(|_| random_density(2, &mut rng)).collect()).unwrap();
        let via_comb = apply_control_comb(&p, &global_storage(&r).unwrap()).unwrap();
        let direct = global_output(&p, &r).unwrap();
        assert!(via_comb.matrix().max_abs_diff(direct.matrix()) < 1e-10);
    }

    #[test]
    fn product_input_comb_single_step() {
        let rho = DensityMatrix::from_diag(&[0.3, 0.7]).unwrap();
        let s = product_input_comb(&InputVector::uniform(&rho, 1)).unwrap();
        assert_eq!(s.steps(), 1);
        assert_eq!(s.init_state(), &rho);
    }

    #[test]
    fn random_control_combs_give_states() {
        let mut rng = rng_for(13, 0);
        for seed in 0..100 {
            let p = random_dilation_process(seed + 100, 2, 2);
            let init = random_density(4, &mut rng);
            let link = random_channel(4, 4, 2, &mut rng);
            let s = ControlComb::new(2, init, vec![link], AncillaPolicy::Keep).unwrap();
            let out = apply_control_comb(&p, &s).unwrap();
            assert!((out.matrix().trace().re - 1.0).abs() < 1e-10);
            let min = hermitian_eig(out.matrix()).unwrap().eigenvalues[0];
            assert!(min > -1e-10);
        }
    }

    #[test]
    fn swap_then_flip_dilation() {
        // step 1 swaps in a thermal environment, step 2 flips the environment then swaps
        let g = DensityMatrix::from_diag(&[0.7, 0.3]).unwrap();
        let xe = ComplexMatrix::identity(2).kron(&x_gate());
        let dil = Dilation::new(g.clone(), vec![swap(), swap().matmul(&xe)]).unwrap();
        let p = build_from_dilation(&dil, 2, 2).unwrap();
        let c1 = conditional_channel(&p, 1, &[]).unwrap();
        assert!(c1.choi_distance(&QuantumChannel::replacement(2, &g)) < 1e-14);
        let c2 = conditional_channel(&p, 2, &[DensityMatrix::basis(2, 0)]).unwrap();
        assert!(
            c2.choi_distance(&QuantumChannel::replacement(2, &DensityMatrix::basis(2, 1))) < 1e-14
        );
    }
}
