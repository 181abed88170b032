//! Verification records for scenarios and process files.

use std::path::Path;

use combworks::comb::{validate_comb, ProcessTensor};
use combworks::io::{parse_process, serialize_process, ProcessMetadata};
use combworks::nonmarkov::NMBracket;
use combworks::protocols::{analyze, BoundCheck, ProtocolReport, ALL_STRATEGIES};
use combworks::random::{random_density, rng_for};
use combworks::thermo::{lemma_s2_bound, Hamiltonian, ThermalContext};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::Settings;
use crate::error::{BenchError, Result};
use crate::report::{ValueRow, VerificationRecord};
use crate::scenarios::{
    scenario, Expected, Quantity, Relation, Scenario, REFERENCE_SCENARIOS, SCENARIOS,
};

/// Number of random qubit quadruples in the continuity-bound sample.
pub const CONTINUITY_SAMPLES: usize = 1000;

/// Tolerance for comb validity records.
pub const COMB_TOL: f64 = 1e-9;

/// A scenario name, or a path to a serialized process whose metadata supplies
/// the Hamiltonian and temperature (falling back to the settings).
pub fn resolve_target(target: &str, settings: &Settings) -> Result<Scenario> {
    if SCENARIOS.contains(&target) {
        return scenario(target, &settings.params());
    }
    let path = Path::new(target);
    if !path.is_file() {
        return Err(BenchError::UnresolvableTarget(target.to_string()));
    }
    let (process, meta) = parse_process(&std::fs::read(path)?)?;
    let temperature = meta.temperature.unwrap_or(settings.temperature);
    let ctx = if meta.hamiltonian_diag.is_empty() {
        ladder_context(process.sys_dim(), settings.energy, temperature)?
    } else {
        ThermalContext::new(Hamiltonian::diagonal(&meta.hamiltonian_diag)?, temperature)?
    };
    if ctx.dim() != process.sys_dim() {
        return Err(BenchError::Config(format!(
            "Hamiltonian dimension {} does not match system dimension {}",
            ctx.dim(),
            process.sys_dim()
        )));
    }
    let name = if meta.name.is_empty() {
        target.to_string()
    } else {
        meta.name
    };
    Ok(Scenario {
        name,
        process,
        ctx,
        expected: vec![],
        notes: "loaded from a process file",
    })
}

/// H = diag(0, E, 2E, …) at the given temperature.
pub fn ladder_context(dim: usize, energy: f64, temperature: f64) -> Result<ThermalContext> {
    let levels: Vec<f64> = (0..dim).map(|k| k as f64 * energy).collect();
    Ok(ThermalContext::new(
        Hamiltonian::diagonal(&levels)?,
        temperature,
    )?)
}

pub fn metadata(s: &Scenario) -> ProcessMetadata {
    ProcessMetadata {
        name: s.name.clone(),
        hamiltonian_diag: s.ctx.hamiltonian().diag(),
        temperature: Some(s.ctx.kt()),
    }
}

/// SHA-256 over the serialized process and the canonical settings.
pub fn digest(p: &ProcessTensor, meta: &ProcessMetadata, settings: &Settings) -> String {
    let mut h = Sha256::new();
    h.update(serialize_process(p, meta));
    h.update(settings.canonical().as_bytes());
    hex::encode(h.finalize())
}

pub fn quantity_value(report: &ProtocolReport, ctx: &ThermalContext, q: Quantity) -> f64 {
    match q {
        Quantity::WSeq => report.w_seq.value,
        Quantity::WJoint => report.w_joint.value,
        Quantity::WGlobal => report.w_global.value,
        Quantity::CombLower => report.w_comb.lower.value,
        Quantity::NmLower => report.nm.lower,
        Quantity::NmUpper => report.nm.upper,
        Quantity::DWi => report.gaps.d_wi,
        Quantity::MtcSaturation => (report.gaps.d_mtc - ctx.kt() * report.nm.upper).abs(),
    }
}

/// Expectation as a check; `Ge` is stored with the sides swapped.
pub fn expected_check(e: &Expected, computed: f64) -> BoundCheck {
    let id = format!("expected.{}", e.quantity.name());
    match e.relation {
        Relation::Eq => BoundCheck::eq(&id, computed, e.value, e.tol),
        Relation::Le => BoundCheck::le(&id, computed, e.value, e.tol),
        Relation::Ge => BoundCheck::le(&id, e.value, computed, e.tol),
    }
}

fn record(prefix: &str, c: &BoundCheck, seed: u64, digest: &str) -> VerificationRecord {
    VerificationRecord {
        id: format!("{prefix}:{}", c.id),
        lhs: c.lhs,
        rhs: c.rhs,
        margin: c.margin(),
        tol: c.tol,
        pass: c.pass(),
        seed,
        digest: digest.to_string(),
    }
}

/// Comb validity, every report check and every scenario expectation.
pub fn verify_scenario(
    s: &Scenario,
    settings: &Settings,
) -> Result<(ProtocolReport, Vec<VerificationRecord>)> {
    let dig = digest(&s.process, &metadata(s), settings);
    let report = analyze(&s.process, &s.ctx, &settings.optimizer(), &ALL_STRATEGIES)?;
    let valid = validate_comb(&s.process);
    let mut checks = vec![
        BoundCheck::le("comb.positivity", -valid.min_eigenvalue, 0.0, COMB_TOL),
        BoundCheck::le("comb.causality", valid.max_residual(), 0.0, COMB_TOL),
    ];
    checks.extend(report.checks.iter().cloned());
    checks.extend(
        s.expected
            .iter()
            .map(|e| expected_check(e, quantity_value(&report, &s.ctx, e.quantity))),
    );
    let records = checks
        .iter()
        .map(|c| record(&s.name, c, settings.seed, &dig))
        .collect();
    Ok((report, records))
}

/// Continuity bound on random qubit quadruples with full-rank σ: lhs counts
/// violations, rhs is zero.
pub fn continuity_record(samples: usize, seed: u64) -> Result<VerificationRecord> {
    let mut rng = rng_for(seed, 0x5201);
    let mut violations = 0usize;
    for _ in 0..samples {
        let rho1 = random_density(2, &mut rng);
        let rho2 = random_density(2, &mut rng);
        let sigma = random_density(2, &mut rng);
        let tau = random_density(2, &mut rng);
        let (lhs, rhs) = lemma_s2_bound(&rho1, &rho2, &sigma, &tau)?;
        if let Some(r) = rhs.finite() {
            if lhs > r + 1e-12 {
                violations += 1;
            }
        }
    }
    let c = BoundCheck::le("continuity.violations", violations as f64, 0.0, 0.0);
    let mut h = Sha256::new();
    h.update(format!("continuity samples={samples} seed={seed}").as_bytes());
    Ok(record("sampled", &c, seed, &hex::encode(h.finalize())))
}

fn keep(id: &str, filter: Option<&[String]>) -> bool {
    let local = id.split_once(':').map_or(id, |(_, rest)| rest);
    match filter {
        None => true,
        Some(prefixes) => prefixes.iter().any(|p| local.starts_with(p.as_str())),
    }
}

/// Verifies `target` (a scenario, a process file, or `all` for the reference
/// scenarios in parallel) plus the sampled continuity check. `filter` keeps
/// records whose check id starts with one of the given prefixes.
pub fn verify_suite(
    target: &str,
    settings: &Settings,
    filter: Option<&[String]>,
) -> Result<Vec<VerificationRecord>> {
    let names: Vec<String> = if target == "all" {
        REFERENCE_SCENARIOS.iter().map(|s| s.to_string()).collect()
    } else {
        vec![target.to_string()]
    };
    let per_target = names
        .par_iter()
        .map(|name| {
            let s = resolve_target(name, settings)?;
            Ok(verify_scenario(&s, settings)?.1)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<VerificationRecord> = per_target.into_iter().flatten().collect();
    records.push(continuity_record(CONTINUITY_SAMPLES, settings.seed)?);
    records.retain(|r| keep(&r.id, filter));
    Ok(records)
}

fn row(quantity: &str, value: f64, expected: Option<&Expected>, provenance: &str) -> ValueRow {
    ValueRow {
        quantity: quantity.to_string(),
        value,
        expected: expected.map(|e| e.value),
        provenance: expected.map_or(provenance, |e| e.provenance).to_string(),
    }
}

fn expectation(s: &Scenario, q: Quantity) -> Option<&Expected> {
    s.expected
        .iter()
        .find(|e| e.quantity == q && e.relation == Relation::Eq)
}

/// Work values of a full analysis, with expected values where the scenario has them.
pub fn work_rows(s: &Scenario, report: &ProtocolReport) -> Vec<ValueRow> {
    let q = |quantity: Quantity| {
        let v = quantity_value(report, &s.ctx, quantity);
        row(quantity.name(), v, expectation(s, quantity), "optimizer")
    };
    let mut rows = vec![
        q(Quantity::WSeq),
        q(Quantity::WJoint),
        q(Quantity::WGlobal),
        q(Quantity::CombLower),
        row("w_comb_upper", report.w_comb.upper, None, "analytic-bound"),
        q(Quantity::DWi),
        row("d_mtc", report.gaps.d_mtc, None, "optimizer"),
        row("d_sec_lower", report.gaps.d_sec.0, None, "optimizer"),
        row("d_sec_upper", report.gaps.d_sec.1, None, "analytic-bound"),
        row("d_n_lower", report.gaps.d_n.0, None, "optimizer"),
        row("d_n_upper", report.gaps.d_n.1, None, "analytic-bound"),
    ];
    rows.extend(nm_rows(s, &report.nm));
    rows.extend(
        report
            .local_max
            .iter()
            .enumerate()
            .map(|(i, w)| row(&format!("local_max_{}", i + 1), w.value, None, "optimizer")),
    );
    rows
}

pub fn nm_rows(s: &Scenario, nm: &NMBracket) -> Vec<ValueRow> {
    vec![
        row(
            "nm_lower",
            nm.lower,
            expectation(s, Quantity::NmLower),
            "optimizer",
        ),
        row(
            "nm_upper",
            nm.upper,
            expectation(s, Quantity::NmUpper),
            "optimizer",
        ),
        row("nm_width", nm.width(), None, "optimizer"),
        row(
            "nm_exact",
            if nm.exact { 1.0 } else { 0.0 },
            None,
            "optimizer",
        ),
    ]
}
