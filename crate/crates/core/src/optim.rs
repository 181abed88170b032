//! Deterministic multi-start Nelder–Mead maximization.
//!
//! Restarts are independent and may run on the rayon pool; the merge keeps the
//! largest value and breaks exact ties by the lowest restart index, so the
//! result does not depend on scheduling.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::random::rng_for;

/// Spread of simplex values below which a single restart is considered converged.
pub const RESTART_FTOL: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Overall reported optimizer tolerance.
    pub tol: f64,
    /// Ancilla dimension for control-comb searches; `None` means d².
    pub ancilla_dim: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iters: 2000,
            seed: 42,
            tol: 1e-6,
            ancilla_dim: None,
        }
    }
}

impl OptimizerConfig {
    /// Same configuration with a different restart count (at least one).
    pub fn with_restarts(&self, restarts: usize) -> Self {
        Self {
            restarts: restarts.max(1),
            ..self.clone()
        }
    }

    pub fn with_max_iters(&self, max_iters: usize) -> Self {
        Self {
            max_iters,
            ..self.clone()
        }
    }
}

/// Outcome of a maximization.
#[derive(Clone, Debug)]
pub struct OptOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// Index of the winning start (seeded starts come first).
    pub start_index: usize,
    /// Whether the winning restart met the convergence criterion.
    pub converged: bool,
    pub evaluations: usize,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

struct LocalRun {
    x: Vec<f64>,
    value: f64,
    converged: bool,
    evaluations: usize,
}

/// Maximizes `f` from `x0` with the adaptive-parameter Nelder–Mead method.
pub fn nelder_mead_max<F>(
    f: &F,
    x0: &[f64],
    step: f64,
    max_iters: usize,
    ftol: f64,
) -> (Vec<f64>, f64, bool)
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let run = nelder_mead(f, x0, step, max_iters, ftol);
    (run.x, run.value, run.converged)
}

fn nelder_mead<F>(f: &F, x0: &[f64], step: f64, max_iters: usize, ftol: f64) -> LocalRun
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let n = x0.len();
    let mut evaluations = 0usize;
    // minimize g = -f
    let mut g = |x: &[f64]| {
        evaluations += 1;
        -sanitize(f(x))
    };
    if n == 0 {
        let v = g(x0);
        return LocalRun {
            x: vec![],
            value: -v,
            converged: true,
            evaluations,
        };
    }
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|p| g(p)).collect();
    let mut converged = false;

    for _ in 0..max_iters {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[n] - vals[0];
        if spread.is_finite() && spread <= ftol * (1.0 + vals[0].abs()) {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for p in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(alpha);
        let fr = g(&xr);
        if fr < vals[0] {
            let xe = along(alpha * beta);
            let fe = g(&xe);
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(alpha * gamma);
            let fc = g(&xc);
            (xc, fc)
        } else {
            let xc = along(-gamma);
            let fc = g(&xc);
            (xc, fc)
        };
        if fc < vals[n].min(fr) {
            simplex[n] = xc;
            vals[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        let best = simplex[0].clone();
        for i in 1..=n {
            for (x, b) in simplex[i].iter_mut().zip(&best) {
                *x = b + delta * (*x - b);
            }
            vals[i] = g(&simplex[i]);
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .unwrap();
    LocalRun {
        x: simplex[best].clone(),
        value: -vals[best],
        converged,
        evaluations,
    }
}

/// One restart: a Nelder–Mead run followed by up to two re-initialized
/// polishing runs around the best point.
fn polished_run<F>(f: &F, x0: &[f64], step: f64, max_iters: usize) -> LocalRun
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let mut run = nelder_mead(f, x0, step, max_iters, RESTART_FTOL);
    let mut local_step = step * 0.1;
    for _ in 0..2 {
        let next = nelder_mead(f, &run.x, local_step, max_iters, RESTART_FTOL);
        let gain = next.value - run.value;
        let evaluations = run.evaluations + next.evaluations;
        if next.value > run.value {
            run = LocalRun {
                evaluations,
                ..next
            };
        } else {
            run.evaluations = evaluations;
        }
        if gain <= RESTART_FTOL * (1.0 + run.value.abs()) {
            break;
        }
        local_step *= 0.1;
    }
    run
}

fn collect_starts(
    dim: usize,
    seeds: &[Vec<f64>],
    cfg: &OptimizerConfig,
    stream: u64,
) -> Vec<Vec<f64>> {
    let mut starts: Vec<Vec<f64>> = seeds.iter().filter(|s| s.len() == dim).cloned().collect();
    let mut rng = rng_for(cfg.seed, stream);
    for _ in 0..cfg.restarts {
        starts.push(
            (0..dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
    }
    if starts.is_empty() {
        starts.push(vec![0.0; dim]);
    }
    starts
}

/// Runs every start and returns the outcomes in start order.
///
/// Starts are the `seeds` (in order) followed by `cfg.restarts` Gaussian
/// starts drawn from the deterministic stream `(cfg.seed, stream)`.
pub fn maximize_all<F>(
    f: &F,
    dim: usize,
    seeds: &[Vec<f64>],
    cfg: &OptimizerConfig,
    stream: u64,
) -> Vec<OptOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    collect_starts(dim, seeds, cfg, stream)
        .par_iter()
        .enumerate()
        .map(|(i, x0)| {
            let run = polished_run(f, x0, 0.3, cfg.max_iters);
            OptOutcome {
                x: run.x,
                value: run.value,
                start_index: i,
                converged: run.converged,
                evaluations: run.evaluations,
            }
        })
        .collect()
}

/// Multi-start maximization of `f` over `R^dim`; the largest value wins and
/// exact ties go to the lowest start index.
pub fn maximize<F>(
    f: &F,
    dim: usize,
    seeds: &[Vec<f64>],
    cfg: &OptimizerConfig,
    stream: u64,
) -> OptOutcome
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    let runs = maximize_all(f, dim, seeds, cfg, stream);
    let evaluations = runs.iter().map(|r| r.evaluations).sum();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.value > runs[best].value {
            best = i;
        }
    }
    OptOutcome {
        evaluations,
        ..runs[best].clone()
    }
}
