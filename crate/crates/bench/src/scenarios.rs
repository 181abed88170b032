//! Named example processes with their expected values, and random ensembles.

use combworks::comb::{build_from_dilation, markov_product, Dilation, ProcessTensor};
use combworks::linalg::{permutation_map, ComplexMatrix, C64, ZERO};
use combworks::random::{random_channel, random_density, random_unitary, rng_for};
use combworks::thermo::{f_max, Hamiltonian, ThermalContext};
use combworks::DensityMatrix;
use serde::Serialize;

use crate::error::{BenchError, Result};

pub const SCENARIOS: [&str; 6] = [
    "fig2a",
    "fig2b",
    "fig2c",
    "markov-saturating",
    "markov-random",
    "dilation-random",
];

/// Scenarios with closed-form expectations, verified together by `verify all`.
pub const REFERENCE_SCENARIOS: [&str; 4] = ["fig2a", "fig2b", "fig2c", "markov-saturating"];

/// Quantity of a protocol report that an expectation refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    WSeq,
    WJoint,
    WGlobal,
    CombLower,
    NmLower,
    NmUpper,
    DWi,
    /// |ΔW^MTC − kT·N| with N the upper side of the bracket.
    MtcSaturation,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::WSeq => "w_seq",
            Quantity::WJoint => "w_joint",
            Quantity::WGlobal => "w_global",
            Quantity::CombLower => "w_comb_lower",
            Quantity::NmLower => "nm_lower",
            Quantity::NmUpper => "nm_upper",
            Quantity::DWi => "d_wi",
            Quantity::MtcSaturation => "mtc_saturation",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// |computed − value| ≤ tol
    Eq,
    /// computed ≤ value + tol
    Le,
    /// computed ≥ value − tol
    Ge,
}

#[derive(Clone, Debug, Serialize)]
pub struct Expected {
    pub quantity: Quantity,
    pub relation: Relation,
    pub value: f64,
    pub tol: f64,
    /// Where the value comes from: "closed-form", "analytic-bound" or "optimizer".
    pub provenance: &'static str,
}

impl Expected {
    fn new(
        quantity: Quantity,
        relation: Relation,
        value: f64,
        tol: f64,
        provenance: &'static str,
    ) -> Self {
        Self {
            quantity,
            relation,
            value,
            tol,
            provenance,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub process: ProcessTensor,
    pub ctx: ThermalContext,
    pub expected: Vec<Expected>,
    pub notes: &'static str,
}

/// Parameters shared by every scenario builder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScenarioParams {
    pub energy: f64,
    pub temperature: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            energy: 1.0,
            temperature: 1.0,
            steps: 2,
            seed: 42,
        }
    }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn perm_unitary(dims: &[usize], perm: &[usize]) -> ComplexMatrix {
    let total: usize = dims.iter().product();
    let p = permutation_map(dims, perm);
    ComplexMatrix::from_fn(
        total,
        total,
        |r, c| if p[r] == c { real(1.0) } else { ZERO },
    )
}

fn x_gate() -> ComplexMatrix {
    ComplexMatrix::from_fn(2, 2, |r, c| if r != c { real(1.0) } else { ZERO })
}

fn swap() -> ComplexMatrix {
    perm_unitary(&[2, 2], &[1, 0])
}

/// CNOT on system ⊗ environment with the environment as control.
fn cnot_env_to_sys() -> ComplexMatrix {
    let mut u = ComplexMatrix::zeros(4, 4);
    for s in 0..2 {
        for e in 0..2 {
            u[(((s ^ e) << 1) | e, (s << 1) | e)] = real(1.0);
        }
    }
    u
}

fn thermal_entropy(ctx: &ThermalContext) -> f64 {
    combworks::entropy::vn_entropy(ctx.gibbs())
}

fn gamma_populations(ctx: &ThermalContext) -> (f64, f64) {
    let g = ctx.gibbs().matrix();
    (g[(0, 0)].re, g[(1, 1)].re)
}

/// Swap with a thermal environment, then flip the environment and swap back.
fn fig2a(ctx: &ThermalContext, energy: f64) -> Result<Scenario> {
    let xe = ComplexMatrix::identity(2).kron(&x_gate());
    let dil = Dilation::new(ctx.gibbs().clone(), vec![swap(), swap().matmul(&xe)])?;
    let process = build_from_dilation(&dil, 2, 2)?;
    let (g0, g1) = gamma_populations(ctx);
    let seq = (g0 - g1) * energy;
    Ok(Scenario {
        name: "fig2a".into(),
        process,
        ctx: ctx.clone(),
        expected: vec![
            Expected::new(Quantity::WSeq, Relation::Eq, seq, 1e-6, "closed-form"),
            Expected::new(Quantity::WJoint, Relation::Eq, energy, 1e-3, "closed-form"),
            Expected::new(
                Quantity::DWi,
                Relation::Eq,
                energy - seq,
                2e-3,
                "closed-form",
            ),
        ],
        notes: "work investment: spending on the first input unlocks a pure second output; \
                the sequential value is kT·S(X(γ)||γ) = (γ₀ − γ₁)E",
    })
}

/// Two environment qubits in a pure state with thermal marginals, each
/// swapped in turn with the system.
fn fig2b(ctx: &ThermalContext) -> Result<Scenario> {
    let (g0, g1) = gamma_populations(ctx);
    let mut v = vec![ZERO; 4];
    v[0] = real(g0.sqrt());
    v[3] = real(g1.sqrt());
    let env = DensityMatrix::pure(&v)?;
    let u1 = perm_unitary(&[2, 2, 2], &[1, 0, 2]);
    let u2 = perm_unitary(&[2, 2, 2], &[2, 1, 0]);
    let process = build_from_dilation(&Dilation::new(env, vec![u1, u2])?, 2, 2)?;
    let two_s = 2.0 * thermal_entropy(ctx);
    let kt = ctx.kt();
    Ok(Scenario {
        name: "fig2b".into(),
        process,
        ctx: ctx.clone(),
        expected: vec![
            Expected::new(Quantity::WSeq, Relation::Le, 0.0, 1e-4, "closed-form"),
            Expected::new(Quantity::WJoint, Relation::Le, 0.0, 1e-4, "closed-form"),
            Expected::new(
                Quantity::WGlobal,
                Relation::Eq,
                kt * two_s,
                1e-3,
                "closed-form",
            ),
            Expected::new(Quantity::NmLower, Relation::Eq, two_s, 2e-3, "closed-form"),
            Expected::new(Quantity::NmUpper, Relation::Eq, two_s, 2e-3, "closed-form"),
            Expected::new(
                Quantity::MtcSaturation,
                Relation::Le,
                0.0,
                3e-3,
                "closed-form",
            ),
        ],
        notes: "locally thermal outputs whose only resource is their correlation; \
                the stored-output gain saturates the memory bound",
    })
}

/// CNOT from a thermal environment onto the system, then CNOT and a flip.
fn fig2c(ctx: &ThermalContext, energy: f64) -> Result<Scenario> {
    let xs = x_gate().kron(&ComplexMatrix::identity(2));
    let dil = Dilation::new(
        ctx.gibbs().clone(),
        vec![cnot_env_to_sys(), xs.matmul(&cnot_env_to_sys())],
    )?;
    let process = build_from_dilation(&dil, 2, 2)?;
    let (_, g1) = gamma_populations(ctx);
    Ok(Scenario {
        name: "fig2c".into(),
        process,
        ctx: ctx.clone(),
        expected: vec![
            Expected::new(
                Quantity::WGlobal,
                Relation::Le,
                2.0 * g1 * energy,
                1e-3,
                "analytic-bound",
            ),
            Expected::new(
                Quantity::CombLower,
                Relation::Ge,
                energy,
                1e-6,
                "closed-form",
            ),
        ],
        notes: "feeding the first output straight back cancels the environment's flip; \
                storing outputs cannot do this",
    })
}

/// Each step swaps the system with a fresh environment qubit in its excited state.
fn markov_saturating(ctx: &ThermalContext, n: usize) -> Result<Scenario> {
    let d = ctx.dim();
    let top = DensityMatrix::basis(d, d - 1);
    let env = DensityMatrix::tensor_all(&vec![top; n]);
    let dims = vec![d; n + 1];
    let us = (0..n)
        .map(|k| {
            let mut perm: Vec<usize> = (0..=n).collect();
            perm.swap(0, k + 1);
            perm_unitary(&dims, &perm)
        })
        .collect();
    let process = build_from_dilation(&Dilation::new(env, us)?, n, d)?;
    Ok(Scenario {
        name: "markov-saturating".into(),
        process,
        ctx: ctx.clone(),
        expected: vec![Expected::new(
            Quantity::WSeq,
            Relation::Eq,
            n as f64 * f_max(ctx),
            1e-6,
            "closed-form",
        )],
        notes: "every output is the most energetic eigenstate, so thermal inputs reach n·F_max",
    })
}

/// n independent random channels of full Kraus rank.
pub fn markov_random(n: usize, d: usize, seed: u64) -> Result<ProcessTensor> {
    let mut rng = rng_for(seed, 0);
    let channels: Vec<_> = (0..n).map(|_| random_channel(d, d, d, &mut rng)).collect();
    Ok(markov_product(&channels)?)
}

/// Environment initialization for random dilations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvInit {
    Random,
    /// Gibbs state of H_E = diag(0, E, 2E, …) at the scenario temperature.
    Thermal,
}

/// Haar-random step unitaries on system ⊗ environment; deterministic per seed.
pub fn random_process(
    n: usize,
    sys_dim: usize,
    env_dim: usize,
    seed: u64,
    env_init: EnvInit,
    params: &ScenarioParams,
) -> Result<ProcessTensor> {
    if n == 0 || sys_dim == 0 || env_dim == 0 {
        return Err(BenchError::Config(
            "dimensions and step count must be at least 1".into(),
        ));
    }
    let mut rng = rng_for(seed, 0);
    let env = match env_init {
        EnvInit::Random => random_density(env_dim, &mut rng),
        EnvInit::Thermal => {
            let levels: Vec<f64> = (0..env_dim).map(|k| k as f64 * params.energy).collect();
            ThermalContext::new(Hamiltonian::diagonal(&levels)?, params.temperature)?
                .gibbs()
                .clone()
        }
    };
    let us = (0..n)
        .map(|_| random_unitary(sys_dim * env_dim, &mut rng))
        .collect();
    Ok(build_from_dilation(&Dilation::new(env, us)?, n, sys_dim)?)
}

/// Builds a named scenario on a qubit with H = E|1⟩⟨1| at temperature T (k = 1).
/// The three example processes always have two steps.
pub fn scenario(name: &str, params: &ScenarioParams) -> Result<Scenario> {
    let ctx = ThermalContext::qubit(params.energy, params.temperature)?;
    let e = params.energy;
    match name {
        "fig2a" => fig2a(&ctx, e),
        "fig2b" => fig2b(&ctx),
        "fig2c" => fig2c(&ctx, e),
        "markov-saturating" => markov_saturating(&ctx, params.steps),
        "markov-random" => Ok(Scenario {
            name: name.into(),
            process: markov_random(params.steps, 2, params.seed)?,
            ctx,
            expected: vec![
                Expected::new(Quantity::NmLower, Relation::Le, 0.0, 1e-3, "closed-form"),
                Expected::new(Quantity::DWi, Relation::Le, 0.0, 2e-3, "closed-form"),
            ],
            notes: "memoryless product of random channels",
        }),
        "dilation-random" => Ok(Scenario {
            name: name.into(),
            process: random_process(params.steps, 2, 2, params.seed, EnvInit::Random, params)?,
            ctx,
            expected: vec![],
            notes: "random system-environment unitaries with a qubit environment",
        }),
        other => Err(BenchError::UnknownScenario(other.to_string())),
    }
}
