//! Bracketing the non-Markovianity N(𝒫) = min_𝒬 max_𝒮 S(𝒫(𝒮)||𝒬(𝒮)).
//!
//! The lower side is the largest multipartite mutual information of a stored
//! global output and is a certified bound. The upper side minimizes, over
//! Markovian candidates, a numerical inner maximization of the process
//! relative entropy; it is a true bound only where that inner maximum is exact.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::QuantumChannel;
use crate::comb::{
    apply_control_comb, conditional_channel, AncillaPolicy, ControlComb, DilationBranches,
    InputVector, OutputMap, ProcessTensor,
};
use crate::entropy::{multi_mutual_info, rel_entropy_matrices, ExtReal};
use crate::error::{CombError, Result};
use crate::linalg::{hermitian_eig, ComplexMatrix, C64, ZERO};
use crate::optim::{maximize, nelder_mead_max, OptimizerConfig, RESTART_FTOL};
use crate::param::{
    channel_from_params, params_from_channel, pure_len, state_len, unitary_from_params,
    vector_from_params,
};
use crate::protocols::{inputs_from_params, params_from_inputs, product_seeds};
use crate::state::DensityMatrix;
use crate::thermo::ThermalContext;

/// Stand-in for an infinite relative entropy inside the outer minimization.
pub const INFINITE_PENALTY: f64 = 1e6;

/// Alternating rounds of the Markov-candidate search.
const OUTER_ROUNDS: usize = 3;

/// Coordinate-descent sweeps per round.
const SWEEPS: usize = 2;

#[derive(Clone, Debug, Serialize)]
pub struct NMBracket {
    /// Certified lower bound (nats).
    pub lower: f64,
    /// Upper estimate (nats); heuristic unless `exact`.
    pub upper: f64,
    /// Both sides agree and the inner maximization covers every strategy class.
    pub exact: bool,
    #[serde(skip)]
    pub lower_witness: InputVector,
    #[serde(skip)]
    pub upper_witness: Vec<QuantumChannel>,
}

impl NMBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// A point of the inner maximization: product inputs with stored outputs, or
/// the raw parameters of a pure-state, unitary-link comb.
#[derive(Clone, Debug)]
enum Probe {
    Product(Vec<DensityMatrix>),
    Comb(Vec<f64>),
}

/// Shapes of the restricted combs searched by the inner maximization.
#[derive(Clone, Copy, Debug)]
struct CombShape {
    d: usize,
    da: usize,
    links: usize,
}

impl CombShape {
    fn new(p: &ProcessTensor, opt: &OptimizerConfig) -> Result<Self> {
        let d = p.sys_dim();
        let da = opt.ancilla_dim.unwrap_or(d * d);
        let mut acc = 1;
        while acc < da {
            acc *= d;
        }
        if acc != da {
            return Err(CombError::Config(format!(
                "ancilla dimension {da} is not a power of the system dimension {d}"
            )));
        }
        Ok(Self {
            d,
            da,
            links: p.steps() - 1,
        })
    }

    fn dj(&self) -> usize {
        self.d * self.da
    }

    fn len(&self) -> usize {
        pure_len(self.dj()) + self.links * self.dj() * self.dj()
    }

    fn decode(&self, x: &[f64]) -> (Vec<C64>, Vec<ComplexMatrix>) {
        let dj = self.dj();
        let psi = vector_from_params(&x[..pure_len(dj)], dj);
        let id = ComplexMatrix::identity(dj);
        let us = (0..self.links)
            .map(|j| {
                let off = pure_len(dj) + j * dj * dj;
                unitary_from_params(&x[off..off + dj * dj], &id)
            })
            .collect();
        (psi, us)
    }

    /// |e_k⟩ ⊗ |0⟩ with identity links, one seed per eigenvector of H.
    fn seeds(&self, ctx: &ThermalContext) -> Vec<Vec<f64>> {
        let spec = hermitian_eig(ctx.hamiltonian().matrix()).expect("Hamiltonians are Hermitian");
        (0..self.d)
            .map(|k| {
                let mut v = vec![ZERO; self.dj()];
                for (a, z) in spec.vector(k).into_iter().enumerate() {
                    v[a * self.da] = z;
                }
                let mut x = crate::param::params_from_vector(&v);
                x.resize(self.len(), 0.0);
                x
            })
            .collect()
    }

    fn output_on_process(
        &self,
        p: &ProcessTensor,
        branches: Option<&DilationBranches>,
        x: &[f64],
    ) -> ComplexMatrix {
        let (psi, us) = self.decode(x);
        self.process_output(p, branches, &psi, &us)
    }

    fn process_output(
        &self,
        p: &ProcessTensor,
        branches: Option<&DilationBranches>,
        psi: &[C64],
        us: &[ComplexMatrix],
    ) -> ComplexMatrix {
        if let Some(b) = branches {
            return b.output(psi, us, self.da);
        }
        let init = DensityMatrix::pure(psi).expect("unit vector");
        let links = us
            .iter()
            .map(QuantumChannel::from_unitary_unchecked)
            .collect();
        let s = ControlComb::new(self.da, init, links, AncillaPolicy::Keep).expect("comb shape");
        apply_control_comb(p, &s).expect("comb shape").into_matrix()
    }

    fn output_on_markov(&self, channels: &[QuantumChannel], x: &[f64]) -> ComplexMatrix {
        let (psi, us) = self.decode(x);
        markov_comb_output(channels, &ComplexMatrix::outer(&psi), &us, self.d, self.da)
    }

    /// (𝒫(𝒮), 𝒬(𝒮)) for the comb encoded by `x`.
    fn outputs(
        &self,
        p: &ProcessTensor,
        branches: Option<&DilationBranches>,
        q: &[QuantumChannel],
        x: &[f64],
    ) -> (ComplexMatrix, ComplexMatrix) {
        let (psi, us) = self.decode(x);
        let b = markov_comb_output(q, &ComplexMatrix::outer(&psi), &us, self.d, self.da);
        (self.process_output(p, branches, &psi, &us), b)
    }
}

/// Final system ⊗ ancilla state of a Markovian process under a unitary-link comb.
fn markov_comb_output(
    channels: &[QuantumChannel],
    init: &ComplexMatrix,
    links: &[ComplexMatrix],
    d: usize,
    da: usize,
) -> ComplexMatrix {
    let dims = [d, da];
    let mut x = init.clone();
    for (k, ch) in channels.iter().enumerate() {
        x = ch
            .apply_to_subsystems(&x, &dims, &[0])
            .expect("channel shape");
        if let Some(u) = links.get(k) {
            x = x.conjugate_by(u);
        }
    }
    x
}

fn product_output_markov(channels: &[QuantumChannel], states: &[DensityMatrix]) -> ComplexMatrix {
    let outs: Vec<ComplexMatrix> = channels
        .iter()
        .zip(states)
        .map(|(c, s)| c.apply_matrix(s.matrix()))
        .collect();
    crate::linalg::tensor_all(&outs)
}

fn penalized(v: ExtReal) -> f64 {
    v.finite().unwrap_or(INFINITE_PENALTY)
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

fn lower_search(
    p: &ProcessTensor,
    map: &OutputMap,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
    extra: &[InputVector],
) -> Result<(f64, InputVector)> {
    let (n, d) = (p.steps(), p.sys_dim());
    let dims = vec![d; n];
    let objective = |x: &[f64]| {
        let out = map.apply(&inputs_from_params(x, n, d));
        multi_mutual_info(&out, &dims).unwrap_or(f64::NAN)
    };
    let mut seeds: Vec<Vec<f64>> = extra
        .iter()
        .filter(|r| r.len() == n)
        .map(|r| params_from_inputs(&r.states))
        .collect();
    seeds.extend(product_seeds(ctx, n).iter().map(|s| params_from_inputs(s)));
    let out = maximize(&objective, n * state_len(d), &seeds, opt, 700);
    Ok((
        out.value.max(0.0),
        InputVector::new(inputs_from_params(&out.x, n, d))?,
    ))
}

/// max_r I(1:…:n) of 𝒫(𝒮_r), a certified lower bound on N(𝒫), with its witness.
pub fn nm_lower_bound(
    p: &ProcessTensor,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
) -> Result<(f64, InputVector)> {
    check_shape(p, ctx)?;
    lower_search(p, &OutputMap::new(p), ctx, opt, &[])
}

/// Inner maximization of S(𝒫(𝒮)||𝒬(𝒮)) for a Markovian 𝒬 given by its channels.
struct InnerSearch<'a> {
    p: &'a ProcessTensor,
    map: &'a OutputMap,
    shape: CombShape,
    branches: Option<DilationBranches>,
    ctx: &'a ThermalContext,
    opt: &'a OptimizerConfig,
}

impl InnerSearch<'_> {
    fn run(&self, q: &[QuantumChannel], probes: &[Probe]) -> (ExtReal, Probe) {
        let (n, d) = (self.p.steps(), self.p.sys_dim());
        let product = |x: &[f64]| {
            let states = inputs_from_params(x, n, d);
            let a = self.map.apply(&states);
            penalized(rel_entropy_matrices(
                a.matrix(),
                &product_output_markov(q, &states),
            ))
        };
        let mut seeds: Vec<Vec<f64>> = probes
            .iter()
            .filter_map(|pr| match pr {
                Probe::Product(s) => Some(params_from_inputs(s)),
                Probe::Comb(_) => None,
            })
            .collect();
        seeds.extend(
            product_seeds(self.ctx, n)
                .iter()
                .map(|s| params_from_inputs(s)),
        );
        let best_product = maximize(&product, n * state_len(d), &seeds, self.opt, 800);
        let mut best = (
            best_product.value,
            Probe::Product(inputs_from_params(&best_product.x, n, d)),
        );
        if self.shape.links > 0 {
            let comb = |x: &[f64]| {
                let (a, b) = self.shape.outputs(self.p, self.branches.as_ref(), q, x);
                penalized(rel_entropy_matrices(&a, &b))
            };
            let mut cseeds: Vec<Vec<f64>> = probes
                .iter()
                .filter_map(|pr| match pr {
                    Probe::Comb(x) => Some(x.clone()),
                    Probe::Product(_) => None,
                })
                .collect();
            cseeds.extend(self.shape.seeds(self.ctx));
            let small = self.opt.with_restarts((self.opt.restarts / 8).max(2));
            let out = maximize(&comb, self.shape.len(), &cseeds, &small, 900);
            if out.value > best.0 {
                best = (out.value, Probe::Comb(out.x));
            }
        }
        let value = self.exact_value(q, &best.1);
        (value, best.1)
    }

    fn probe_outputs(&self, probe: &Probe) -> ComplexMatrix {
        match probe {
            Probe::Product(s) => self.map.apply(s).into_matrix(),
            Probe::Comb(x) => self
                .shape
                .output_on_process(self.p, self.branches.as_ref(), x),
        }
    }

    fn candidate_output(&self, q: &[QuantumChannel], probe: &Probe) -> ComplexMatrix {
        match probe {
            Probe::Product(s) => product_output_markov(q, s),
            Probe::Comb(x) => self.shape.output_on_markov(q, x),
        }
    }

    fn exact_value(&self, q: &[QuantumChannel], probe: &Probe) -> ExtReal {
        rel_entropy_matrices(&self.probe_outputs(probe), &self.candidate_output(q, probe))
    }
}

/// Lower estimate of the process relative entropy S̄(𝒫||𝒬) for a Markovian
/// 𝒬 = ℰ₁ ⊗ … ⊗ ℰₙ: the best of stored-output product strategies and
/// pure-state, unitary-link combs keeping the ancilla.
pub fn process_rel_entropy(
    p: &ProcessTensor,
    q: &[QuantumChannel],
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
) -> Result<ExtReal> {
    check_shape(p, ctx)?;
    if q.len() != p.steps()
        || q.iter()
            .any(|c| c.dim_in() != p.sys_dim() || c.dim_out() != p.sys_dim())
    {
        return Err(CombError::DimensionMismatch(format!(
            "{} Markov channels for a {}-step process",
            q.len(),
            p.steps()
        )));
    }
    let map = OutputMap::new(p);
    let inner = InnerSearch {
        p,
        map: &map,
        shape: CombShape::new(p, opt)?,
        branches: p
            .dilation()
            .map(|dil| DilationBranches::new(dil, p.sys_dim())),
        ctx,
        opt,
    };
    Ok(inner.run(q, &[]).0)
}

/// Outcome of the closest-Markov search.
#[derive(Clone, Debug, Serialize)]
pub struct MarkovSearch {
    #[serde(skip)]
    pub channels: Vec<QuantumChannel>,
    /// Inner maximum at the returned candidate (nats).
    pub value: f64,
    pub candidates_evaluated: usize,
    pub probes: usize,
}

/// Markov candidates built from 𝒫 itself: conditional channels at thermal
/// prefixes and replacement channels onto the step marginals of 𝒫(𝒮_γ).
fn seed_candidates(
    p: &ProcessTensor,
    map: &OutputMap,
    ctx: &ThermalContext,
) -> Result<Vec<Vec<QuantumChannel>>> {
    let (n, d) = (p.steps(), p.sys_dim());
    let gibbs = ctx.gibbs().clone();
    let mut conditional = Vec::with_capacity(n);
    for i in 1..=n {
        conditional.push(conditional_channel(p, i, &vec![gibbs.clone(); i - 1])?);
    }
    let out = map.apply(&vec![gibbs; n]);
    let replacement = out
        .marginals(&vec![d; n])?
        .iter()
        .map(|m| QuantumChannel::replacement(d, m))
        .collect();
    Ok(vec![conditional, replacement])
}

fn search_upper(
    p: &ProcessTensor,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
    map: &OutputMap,
    initial_probes: Vec<Probe>,
) -> Result<MarkovSearch> {
    let (n, d) = (p.steps(), p.sys_dim());
    let env = d * d;
    let inner = InnerSearch {
        p,
        map,
        shape: CombShape::new(p, opt)?,
        branches: p
            .dilation()
            .map(|dil| DilationBranches::new(dil, p.sys_dim())),
        ctx,
        opt,
    };
    let mut probes = initial_probes;
    let seeds = seed_candidates(p, map, ctx)?;
    let evaluated: Vec<(ExtReal, Probe)> =
        seeds.par_iter().map(|q| inner.run(q, &probes)).collect();
    let mut candidates_evaluated = seeds.len();
    let mut best_idx = 0;
    for (i, (v, _)) in evaluated.iter().enumerate() {
        if *v < evaluated[best_idx].0 {
            best_idx = i;
        }
    }
    let mut best_value = evaluated[best_idx].0;
    let mut best = seeds[best_idx].clone();
    probes.extend(evaluated.into_iter().map(|(_, w)| w));

    for _ in 0..OUTER_ROUNDS {
        if best_value == ExtReal::Finite(0.0) {
            break;
        }
        let targets: Vec<ComplexMatrix> = probes.iter().map(|pr| inner.probe_outputs(pr)).collect();
        let worst = |q: &[QuantumChannel]| -> f64 {
            probes
                .iter()
                .zip(&targets)
                .map(|(pr, t)| penalized(rel_entropy_matrices(t, &inner.candidate_output(q, pr))))
                .fold(0.0, f64::max)
        };
        let mut params: Vec<Vec<f64>> = best
            .iter()
            .map(|c| params_from_channel(c, env).expect("Choi rank at most d²"))
            .collect();
        let mut current: Vec<QuantumChannel> = params
            .iter()
            .map(|x| channel_from_params(x, d, env))
            .collect();
        for _ in 0..SWEEPS {
            for j in 0..n {
                let f = |x: &[f64]| {
                    let mut q = current.clone();
                    q[j] = channel_from_params(x, d, env);
                    -worst(&q)
                };
                let (x, _, _) = nelder_mead_max(&f, &params[j], 0.1, opt.max_iters, RESTART_FTOL);
                current[j] = channel_from_params(&x, d, env);
                params[j] = x;
            }
        }
        // the probe maximum is a lower bound on the inner maximum
        if ExtReal::Finite(worst(&current)) >= best_value {
            break;
        }
        let (value, witness) = inner.run(&current, &probes);
        candidates_evaluated += 1;
        probes.push(witness);
        if value < best_value {
            best_value = value;
            best = current;
        }
    }
    Ok(MarkovSearch {
        channels: best,
        value: best_value.to_f64().max(0.0),
        candidates_evaluated,
        probes: probes.len(),
    })
}

/// The Markovian candidate minimizing the inner maximum, with diagnostics.
pub fn closest_markov_search(
    p: &ProcessTensor,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
) -> Result<MarkovSearch> {
    check_shape(p, ctx)?;
    let map = OutputMap::new(p);
    let (_, witness) = lower_search(p, &map, ctx, opt, &[])?;
    search_upper(p, ctx, opt, &map, vec![Probe::Product(witness.states)])
}

/// Heuristic upper estimate of N(𝒫) and the Markov channels achieving it.
pub fn nm_upper_estimate(
    p: &ProcessTensor,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
) -> Result<(f64, Vec<QuantumChannel>)> {
    let s = closest_markov_search(p, ctx, opt)?;
    Ok((s.value, s.channels))
}

/// Both sides of N(𝒫), the lower search seeded with the given input vectors.
pub fn nm_bracket_seeded(
    p: &ProcessTensor,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
    seeds: &[InputVector],
) -> Result<NMBracket> {
    check_shape(p, ctx)?;
    let map = OutputMap::new(p);
    let (lower, witness) = lower_search(p, &map, ctx, opt, seeds)?;
    let search = search_upper(
        p,
        ctx,
        opt,
        &map,
        vec![Probe::Product(witness.states.clone())],
    )?;
    // the witness seeds every inner search, so upper ≥ lower up to round-off
    let upper = search.value;
    Ok(NMBracket {
        lower,
        upper,
        exact: p.steps() <= 2 && upper - lower <= 1e-3,
        lower_witness: witness,
        upper_witness: search.channels,
    })
}

pub fn nm_bracket(
    p: &ProcessTensor,
    ctx: &ThermalContext,
    opt: &OptimizerConfig,
) -> Result<NMBracket> {
    nm_bracket_seeded(p, ctx, opt, &[])
}

/// S(𝒫_{i|r}(ρᵢ)||𝒱ᵢ(ρᵢ)) for each step, with r given and 𝒱 Markovian.
pub fn step_residuals(
    p: &ProcessTensor,
    v: &[QuantumChannel],
    r: &InputVector,
) -> Result<Vec<ExtReal>> {
    (1..=p.steps())
        .map(|i| {
            let ch = conditional_channel(p, i, &r.states[..i - 1])?;
            let rho = r.states[i - 1].matrix();
            Ok(rel_entropy_matrices(
                &ch.apply_matrix(rho),
                &v[i - 1].apply_matrix(rho),
            ))
        })
        .collect()
}
