//! The four work-extraction protocol classes and the gaps between them.
//!
//! Sequential, joint and global values are maximized over product inputs;
//! comb optimization is reported as a bracket. Achievers found by one
//! protocol seed the next, and the final joint and global values are the best
//! objective values over the pooled achievers, so the ordering
//! `seq ≤ joint ≤ global ≤ comb.lower` holds by construction.

use serde::Serialize;

use crate::channel::QuantumChannel;
use crate::comb::{
    apply_control_comb, conditional_channel, AncillaPolicy, ControlComb, DilationBranches,
    InputVector, OutputMap, ProcessTensor,
};
use crate::error::{CombError, Result};
use crate::linalg::{hermitian_eig, ComplexMatrix};
use crate::nonmarkov::NMBracket;
use crate::optim::{maximize, nelder_mead_max, OptimizerConfig, RESTART_FTOL};
use crate::param::{
    params_from_state, params_from_vector, pure_len, state_from_params, state_len,
    unitary_from_params, vector_from_params,
};
use crate::state::DensityMatrix;
use crate::thermo::{
    channel_work_seeded, f_max, structured_starts, thm1_prefactor, thm3_prefactor, ThermalContext,
    WorkValue,
};

/// Product-input starting points: every combination of structured states when
/// there are at most 16, otherwise the uniform ones.
pub(crate) fn product_seeds(ctx: &ThermalContext, n: usize) -> Vec<Vec<DensityMatrix>> {
    let base = structured_starts(ctx);
    let total = base.len().checked_pow(n as u32).unwrap_or(usize::MAX);
    if total <= 16 {
        (0..total)
            .map(|mut idx| {
                (0..n)
                    .map(|_| {
                        let s = base[idx % base.len()].clone();
                        idx /= base.len();
                        s
                    })
                    .collect()
            })
            .collect()
    } else {
        base.iter().map(|s| vec![s.clone(); n]).collect()
    }
}

pub(crate) fn inputs_from_params(x: &[f64], n: usize, d: usize) -> Vec<DensityMatrix> {
    let len = state_len(d);
    (0..n)
        .map(|k| state_from_params(&x[k * len..(k + 1) * len], d))
        .collect()
}

pub(crate) fn params_from_inputs(states: &[DensityMatrix]) -> Vec<f64> {
    states.iter().flat_map(params_from_state).collect()
}

fn check_shape(p: &ProcessTensor, ctx: &ThermalContext) -> Result<()> {
    if p.sys_dim() != ctx.dim() {
        return Err(CombError::DimensionMismatch(format!(
            "process on dimension {} with a {}-dimensional Hamiltonian",
            p.sys_dim(),
            ctx.dim()
        )));
    }
    Ok(())
}

/// Objectives over product inputs sharing one precomputed output map.
struct ProductObjectives<'a> {
    map: OutputMap,
    ctx: &'a ThermalContext,
}

impl<'a> ProductObjectives<'a> {
    fn new(p: &ProcessTensor, ctx: &'a ThermalContext) -> Self {
        Self {
            map: OutputMap::new(p),
            ctx,
        }
    }

    fn n(&self) -> usize {
        self.map.steps()
    }

    fn d(&self) -> usize {
        self.map.sys_dim()
    }

    /// (Σᵢ[W(outᵢ) − W(ρᵢ)], W(out) − Σᵢ W(ρᵢ)).
    fn both(&self, states: &[DensityMatrix]) -> (f64, f64) {
        let out = self.map.apply(states);
        let n = self.n();
        let input_work: f64 = states.iter().map(|s| self.ctx.work(s)).sum();
        let marginals = out.marginals(&vec![self.d(); n]).expect("output dims");
        let local: f64 = marginals.iter().map(|m| self.ctx.work(m)).sum();
        (
            local - input_work,
            self.ctx.multi_work(&out, n) - input_work,
        )
    }

    fn joint(&self, states: &[DensityMatrix]) -> f64 {
        let out = self.map.apply(states);
        let marginals = out
            .marginals(&vec![self.d(); self.n()])
            .expect("output dims");
        marginals
            .iter()
            .zip(states)
            .map(|(m, s)| self.ctx.work(m) - self.ctx.work(s))
            .sum()
    }

    fn global(&self, states: &[DensityMatrix]) -> f64 {
        let out = self.map.apply(states);
        let input_work: f64 = states.iter().map(|s| self.ctx.work(s)).sum();
        self.ctx.multi_work(&out, self.n()) - input_work
    }
}

/// Greedy protocol: at each step, extract the channel work of the conditional
/// channel given the inputs chosen so far.
pub fn sequential_work(
    p: &ProcessTensor,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
) -> Result<(WorkValue, InputVector)> {
    check_shape(p, ctx)?;
    let mut states = Vec::with_capacity(p.steps());
    let mut total = 0.0;
    let mut converged = true;
    for i in 1..=p.steps() {
        let ch = conditional_channel(p, i, &states)?;
        let w = channel_work_seeded(&ch, ctx, opt, &[], 100 + i as u64)?;
        total += w.value;
        converged &= w.converged;
        states.push(w.achiever.expect("channel work records its achiever"));
    }
    let r = InputVector::new(states)?;
    Ok((
        WorkValue {
            value: total,
            achiever: None,
            converged,
        },
        r,
    ))
}

fn optimize_products(
    f: &(dyn Fn(&[DensityMatrix]) -> f64 + Sync),
    n: usize,
    d: usize,
    seeds: &[Vec<DensityMatrix>],
    opt: &OptimizerConfig,
    stream: u64,
) -> (f64, Vec<DensityMatrix>, bool) {
    let objective = |x: &[f64]| f(&inputs_from_params(x, n, d));
    let seed_params: Vec<Vec<f64>> = seeds.iter().map(|s| params_from_inputs(s)).collect();
    let out = maximize(&objective, n * state_len(d), &seed_params, opt, stream);
    (out.value, inputs_from_params(&out.x, n, d), out.converged)
}

/// Three-way outcome of the product-input protocols, computed together so the
/// joint and global values share their achievers.
#[derive(Clone, Debug)]
pub struct ProductProtocols {
    pub seq: (WorkValue, InputVector),
    pub joint: (WorkValue, InputVector),
    pub global: (WorkValue, InputVector),
}

/// Sequential, joint and global work with cross-seeded searches.
pub fn product_protocols(
    p: &ProcessTensor,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
) -> Result<ProductProtocols> {
    let seq = sequential_work(p, ctx, opt)?;
    let (n, d) = (p.steps(), p.sys_dim());
    let obj = ProductObjectives::new(p, ctx);
    let mut base_seeds = vec![seq.1.states.clone()];
    base_seeds.extend(product_seeds(ctx, n));

    let joint_f = |s: &[DensityMatrix]| obj.joint(s);
    let global_f = |s: &[DensityMatrix]| obj.global(s);
    let (_, rj, cj) = optimize_products(&joint_f, n, d, &base_seeds, opt, 200);
    let mut gseeds = vec![rj.clone()];
    gseeds.extend(base_seeds.iter().cloned());
    let (_, rg, cg) = optimize_products(&global_f, n, d, &gseeds, opt, 300);
    // local polish of the joint objective from the global achiever
    let polish = |x: &[f64]| obj.joint(&inputs_from_params(x, n, d));
    let (xp, _, _) = nelder_mead_max(
        &polish,
        &params_from_inputs(&rg),
        0.05,
        opt.max_iters,
        RESTART_FTOL,
    );
    let rp = inputs_from_params(&xp, n, d);

    let mut pool = vec![seq.1.states.clone(), rj, rg, rp];
    pool.dedup();
    let scored: Vec<(f64, f64)> = pool.iter().map(|s| obj.both(s)).collect();
    let best = |key: fn(&(f64, f64)) -> f64| -> usize {
        let mut b = 0;
        for (i, v) in scored.iter().enumerate() {
            if key(v) > key(&scored[b]) {
                b = i;
            }
        }
        b
    };
    let ij = best(|v| v.0);
    let ig = best(|v| v.1);
    let joint = (
        WorkValue {
            value: scored[ij].0,
            achiever: None,
            converged: cj,
        },
        InputVector::new(pool[ij].clone())?,
    );
    let global = (
        WorkValue {
            value: scored[ig].1,
            achiever: None,
            converged: cg,
        },
        InputVector::new(pool[ig].clone())?,
    );
    Ok(ProductProtocols { seq, joint, global })
}

/// max_r Σᵢ [W(𝒫_{i|r}(ρᵢ)) − W(ρᵢ)] (consistent-input reading).
pub fn joint_work(
    p: &ProcessTensor,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
) -> Result<(WorkValue, InputVector)> {
    Ok(product_protocols(p, ctx, opt)?.joint)
}

/// max_r W(𝒫(𝒮_r)) − Σᵢ W(ρᵢ) with every output stored until the end.
pub fn global_work(
    p: &ProcessTensor,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
) -> Result<(WorkValue, InputVector)> {
    Ok(product_protocols(p, ctx, opt)?.global)
}

/// Joint-objective value of a fixed input vector.
pub fn joint_objective(p: &ProcessTensor, ctx: &ThermalContext, r: &InputVector) -> f64 {
    ProductObjectives::new(p, ctx).joint(&r.states)
}

/// Global-objective value of a fixed input vector.
pub fn global_objective(p: &ProcessTensor, ctx: &ThermalContext, r: &InputVector) -> f64 {
    ProductObjectives::new(p, ctx).global(&r.states)
}

/// max over prefixes and inputs of W(𝒫_{i|r}(ρ)) − W(ρ), i.e. the largest
/// channel work step `i` can offer.
pub fn local_max_work(
    p: &ProcessTensor,
    i: usize,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
) -> Result<WorkValue> {
    check_shape(p, ctx)?;
    if i == 0 || i > p.steps() {
        return Err(CombError::InvalidStep {
            index: i,
            steps: p.steps(),
        });
    }
    let d = p.sys_dim();
    if i == 1 {
        let ch = conditional_channel(p, 1, &[])?;
        return channel_work_seeded(&ch, ctx, opt, &[], 400);
    }
    let objective = |x: &[f64]| {
        let states = inputs_from_params(x, i, d);
        let ch = conditional_channel(p, i, &states[..i - 1]).expect("prefix shape");
        let rho = &states[i - 1];
        let out = DensityMatrix::from_psd_unchecked(ch.apply_matrix(rho.matrix()));
        ctx.work(&out) - ctx.work(rho)
    };
    let seeds: Vec<Vec<f64>> = product_seeds(ctx, i)
        .iter()
        .map(|s| params_from_inputs(s))
        .collect();
    let out = maximize(&objective, i * state_len(d), &seeds, opt, 400 + i as u64);
    let states = inputs_from_params(&out.x, i, d);
    Ok(WorkValue {
        value: out.value,
        achiever: states.last().cloned(),
        converged: out.converged,
    })
}

/// Candidate strategy families for the comb lower bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombStrategy {
    /// Product inputs with stored outputs (reuses the global value).
    GlobalStorage,
    /// Prepare ρ₁, feed every output straight into the next step.
    IdentityFeedthrough,
    /// Pure system–ancilla state and unitary links on system ⊗ ancilla.
    Parametrized,
}

pub const ALL_STRATEGIES: [CombStrategy; 3] = [
    CombStrategy::GlobalStorage,
    CombStrategy::IdentityFeedthrough,
    CombStrategy::Parametrized,
];

#[derive(Clone, Debug, Serialize)]
pub struct CombBracket {
    pub lower: WorkValue,
    pub lower_strategy: CombStrategy,
    pub upper: f64,
    /// True when the upper side came from the non-Markovian bound rather than n·F_max.
    pub upper_from_nm: bool,
}

/// Number of system copies making up an ancilla of dimension `da`.
fn ancilla_copies(d: usize, da: usize) -> Result<usize> {
    let mut k = 0;
    let mut acc = 1;
    while acc < da {
        acc *= d;
        k += 1;
    }
    if acc != da {
        return Err(CombError::Config(format!(
            "ancilla dimension {da} is not a power of the system dimension {d}"
        )));
    }
    Ok(k)
}

/// Σ_k H acting on copy k of `copies` system copies.
fn copies_hamiltonian(h: &ComplexMatrix, copies: usize) -> ComplexMatrix {
    let d = h.rows();
    let total = d.pow(copies as u32);
    let mut out = ComplexMatrix::zeros(total, total);
    for k in 0..copies {
        let left = ComplexMatrix::identity(d.pow(k as u32));
        let right = ComplexMatrix::identity(d.pow((copies - 1 - k) as u32));
        out = &out + &left.kron(h).kron(&right);
    }
    out
}

fn identity_feedthrough(
    p: &ProcessTensor,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
) -> Result<WorkValue> {
    let d = p.sys_dim();
    let links = vec![QuantumChannel::identity(d); p.steps() - 1];
    let objective = |x: &[f64]| {
        let rho = state_from_params(x, d);
        let s = ControlComb::new(1, rho.clone(), links.clone(), AncillaPolicy::Discard)
            .expect("shapes");
        let out = apply_control_comb(p, &s).expect("shapes");
        ctx.work(&out) - ctx.work(&rho)
    };
    let seeds: Vec<Vec<f64>> = structured_starts(ctx)
        .iter()
        .map(params_from_state)
        .collect();
    let out = maximize(&objective, state_len(d), &seeds, opt, 500);
    Ok(WorkValue {
        value: out.value,
        achiever: Some(state_from_params(&out.x, d)),
        converged: out.converged,
    })
}

fn parametrized_comb(
    p: &ProcessTensor,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
) -> Result<WorkValue> {
    let d = p.sys_dim();
    let da = opt.ancilla_dim.unwrap_or(d * d);
    let copies = ancilla_copies(d, da)? + 1;
    let dj = d * da;
    let h = copies_hamiltonian(ctx.hamiltonian().matrix(), copies);
    let links = p.steps() - 1;
    let ulen = dj * dj;
    let id = ComplexMatrix::identity(dj);
    let branches = p.dilation().map(|dil| DilationBranches::new(dil, d));
    let objective = |x: &[f64]| {
        let v = vector_from_params(&x[..pure_len(dj)], dj);
        let psi = DensityMatrix::pure(&v).expect("unit vector");
        let mut cost = ctx.multi_work(&psi, copies);
        let mut us = Vec::with_capacity(links);
        for j in 0..links {
            let off = pure_len(dj) + j * ulen;
            let u = unitary_from_params(&x[off..off + ulen], &id);
            let gain = &h.conjugate_by(&u.adjoint()) - &h;
            cost += hermitian_eig(&gain.hermitian_part())
                .map(|s| *s.eigenvalues.last().expect("nonempty"))
                .unwrap_or(f64::INFINITY);
            us.push(u);
        }
        let out = match &branches {
            Some(b) => DensityMatrix::from_psd_unchecked(b.output(&v, &us, da)),
            None => {
                let channels = us
                    .iter()
                    .map(QuantumChannel::from_unitary_unchecked)
                    .collect();
                let s = ControlComb::new(da, psi, channels, AncillaPolicy::Keep).expect("shapes");
                apply_control_comb(p, &s).expect("shapes")
            }
        };
        ctx.multi_work(&out, copies) - cost
    };
    let dim = pure_len(dj) + links * ulen;
    let spec = hermitian_eig(ctx.hamiltonian().matrix())?;
    let seeds: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let mut v = vec![crate::linalg::ZERO; dj];
            for (a, z) in spec.vector(k).into_iter().enumerate() {
                v[a * da] = z;
            }
            let mut x = params_from_vector(&v);
            x.resize(dim, 0.0);
            x
        })
        .collect();
    let small = opt.with_restarts((opt.restarts / 4).max(2));
    let out = maximize(&objective, dim, &seeds, &small, 600);
    Ok(WorkValue {
        value: out.value,
        achiever: None,
        converged: out.converged,
    })
}

/// Bracket on the comb-optimized work. The lower side is the best of the
/// requested strategy families (`global` supplies the stored-output value);
/// the upper side is min{n·F_max, global + kT·𝒢·N^{1/4}} with `nm_upper`
/// when one is given.
pub fn comb_work_bracket(
    p: &ProcessTensor,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
    strategies: &[CombStrategy],
    global: &WorkValue,
    nm_upper: Option<f64>,
) -> Result<CombBracket> {
    check_shape(p, ctx)?;
    let mut lower = WorkValue::exact(f64::NEG_INFINITY, None);
    let mut lower_strategy = CombStrategy::GlobalStorage;
    for &s in strategies {
        let w = match s {
            CombStrategy::GlobalStorage => global.clone(),
            CombStrategy::IdentityFeedthrough => identity_feedthrough(p, ctx, opt)?,
            CombStrategy::Parametrized => {
                if p.steps() < 2 {
                    continue;
                }
                parametrized_comb(p, ctx, opt)?
            }
        };
        if w.value > lower.value {
            lower = w;
            lower_strategy = s;
        }
    }
    if lower.value == f64::NEG_INFINITY {
        lower = global.clone();
    }
    let n = p.steps();
    let cap = n as f64 * f_max(ctx);
    let (upper, upper_from_nm) = match nm_upper {
        Some(nm) => {
            let analytic =
                global.value + ctx.kt() * thm3_prefactor(ctx, n) * nm.max(0.0).powf(0.25);
            if analytic < cap {
                (analytic, true)
            } else {
                (cap, false)
            }
        }
        None => (cap, false),
    };
    Ok(CombBracket {
        lower,
        lower_strategy,
        upper,
        upper_from_nm,
    })
}

/// Inequality (`lhs ≤ rhs + tol`) or equality (`|lhs − rhs| ≤ tol`) check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Le,
    Eq,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub id: String,
    pub kind: CheckKind,
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
}

impl BoundCheck {
    pub fn le(id: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        Self {
            id: id.to_string(),
            kind: CheckKind::Le,
            lhs,
            rhs,
            tol,
        }
    }

    pub fn eq(id: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        Self {
            id: id.to_string(),
            kind: CheckKind::Eq,
            lhs,
            rhs,
            tol,
        }
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn pass(&self) -> bool {
        match self.kind {
            CheckKind::Le => self.lhs <= self.rhs + self.tol,
            CheckKind::Eq => (self.lhs - self.rhs).abs() <= self.tol,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Gaps {
    pub d_wi: f64,
    pub d_mtc: f64,
    /// (lower, upper) bracket of W^comb − W^global.
    pub d_sec: (f64, f64),
    /// (lower, upper) bracket of W^comb − W^seq.
    pub d_n: (f64, f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct ProtocolReport {
    pub steps: usize,
    pub w_seq: WorkValue,
    pub w_joint: WorkValue,
    pub w_global: WorkValue,
    pub w_comb: CombBracket,
    pub local_max: Vec<WorkValue>,
    pub gaps: Gaps,
    pub nm: NMBracket,
    #[serde(skip)]
    pub r_seq: InputVector,
    #[serde(skip)]
    pub r_joint: InputVector,
    #[serde(skip)]
    pub r_global: InputVector,
    pub checks: Vec<BoundCheck>,
    pub restarts: usize,
    pub converged: bool,
}

/// Assembles the gaps and the bound checks from already computed values.
pub fn gap_report_from(
    p: &ProcessTensor,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
    values: ProductProtocols,
    nm: NMBracket,
    strategies: &[CombStrategy],
) -> Result<ProtocolReport> {
    let n = p.steps();
    let kt = ctx.kt();
    let ProductProtocols { seq, joint, global } = values;
    let comb = comb_work_bracket(p, ctx, opt, strategies, &global.0, Some(nm.upper))?;
    let local_max = (1..=n)
        .map(|i| local_max_work(p, i, ctx, opt))
        .collect::<Result<Vec<_>>>()?;

    let (ws, wj, wg) = (seq.0.value, joint.0.value, global.0.value);
    let gaps = Gaps {
        d_wi: wj - ws,
        d_mtc: wg - wj,
        d_sec: (comb.lower.value - wg, comb.upper - wg),
        d_n: (comb.lower.value - ws, comb.upper - ws),
    };
    let tol = opt.tol;
    let nm_up = nm.upper.max(0.0);
    let s_max = ctx.max_rel_entropy();
    let combined = kt
        * (nm_up
            + ((3 * n - 2) as f64 * s_max + 2f64.sqrt() * 2f64.ln() * n as f64)
                * (2.0 * nm_up).powf(0.25));
    let sum_local: f64 = local_max.iter().map(|w| w.value).sum();
    let cap = n as f64 * f_max(ctx);
    let max_work = [ws, wj, wg, comb.lower.value, sum_local]
        .into_iter()
        .chain(local_max.iter().map(|w| w.value))
        .fold(f64::NEG_INFINITY, f64::max);
    let checks = vec![
        BoundCheck::le("hierarchy.seq_le_joint", ws, wj, tol),
        BoundCheck::le("hierarchy.joint_le_global", wj, wg, tol),
        BoundCheck::le("hierarchy.global_le_comb", wg, comb.lower.value, tol),
        BoundCheck::le("comb.bracket", comb.lower.value, comb.upper, tol),
        BoundCheck::le(
            "bound.wi",
            gaps.d_wi,
            kt * thm1_prefactor(ctx, n) * nm_up.powf(0.25),
            tol,
        ),
        BoundCheck::le("bound.mtc", gaps.d_mtc, kt * nm_up, tol),
        BoundCheck::le(
            "bound.sec",
            gaps.d_sec.0,
            kt * thm3_prefactor(ctx, n) * nm_up.powf(0.25),
            tol,
        ),
        BoundCheck::le("bound.local_athermality", wg, sum_local + kt * nm_up, tol),
        BoundCheck::le("bound.combined", gaps.d_n.0, combined, tol),
        BoundCheck::le("fmax.bound", max_work, cap, 1e-6),
        BoundCheck::le("nm.bracket", nm.lower, nm.upper, 1e-9),
    ];
    let converged = seq.0.converged && joint.0.converged && global.0.converged;
    Ok(ProtocolReport {
        steps: n,
        w_seq: seq.0,
        w_joint: joint.0,
        w_global: global.0,
        w_comb: comb,
        local_max,
        gaps,
        nm,
        r_seq: seq.1,
        r_joint: joint.1,
        r_global: global.1,
        checks,
        restarts: opt.restarts,
        converged,
    })
}

/// Full report with a caller-supplied non-Markovianity bracket.
pub fn gap_report(
    p: &ProcessTensor,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
    nm: NMBracket,
) -> Result<ProtocolReport> {
    let values = product_protocols(p, ctx, opt)?;
    gap_report_from(p, ctx, opt, values, nm, &ALL_STRATEGIES)
}

/// Protocols, non-Markovianity bracket (seeded with the protocol achievers)
/// and the gap report in one call.
pub fn analyze(
    p: &ProcessTensor,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
    strategies: &[CombStrategy],
) -> Result<ProtocolReport> {
    let values = product_protocols(p, ctx, opt)?;
    let seeds = [
        values.global.1.clone(),
        values.joint.1.clone(),
        values.seq.1.clone(),
    ];
    let nm = crate::nonmarkov::nm_bracket_seeded(p, ctx, opt, &seeds)?;
    gap_report_from(p, ctx, opt, values, nm, strategies)
}
