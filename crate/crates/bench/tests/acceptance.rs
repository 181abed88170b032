//! Acceptance criteria 1 to 8, one test and one PASS/FAIL line each.

use std::io::Write;
use std::sync::OnceLock;

use combworks::entropy::{rel_entropy, trace_distance};
use combworks::protocols::{analyze, sequential_work, ProtocolReport, ALL_STRATEGIES};
use combworks::random::{random_channel, random_density, rng_for};
use combworks::thermo::{f_max, ThermalContext};
use combworks_bench::config::Settings;
use combworks_bench::scenarios::{
    markov_random, random_process, scenario, EnvInit, ScenarioParams,
};
use combworks_bench::verify::{continuity_record, verify_scenario, CONTINUITY_SAMPLES};
use rayon::prelude::*;

const ENSEMBLE: u64 = 10;
const RESTARTS: usize = 8;

fn settings() -> Settings {
    Settings {
        restarts: RESTARTS,
        ..Settings::default()
    }
}

fn ctx() -> ThermalContext {
    ThermalContext::qubit(1.0, 1.0).unwrap()
}

/// Written straight to stderr so the line shows without `--nocapture`.
fn verdict(criterion: u32, items: &[(String, bool)]) -> bool {
    let ok = items.iter().all(|(_, pass)| *pass);
    let detail: Vec<String> = items
        .iter()
        .map(|(text, pass)| format!("{text} [{}]", if *pass { "ok" } else { "fail" }))
        .collect();
    let line = format!(
        "acceptance criterion {criterion}: {} | {}\n",
        if ok { "PASS" } else { "FAIL" },
        detail.join("; ")
    );
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    ok
}

fn item(text: String, pass: bool) -> (String, bool) {
    (text, pass)
}

struct Analyzed {
    report: ProtocolReport,
    records_pass: Vec<(String, bool)>,
}

fn analyzed(name: &str) -> Analyzed {
    let st = settings();
    let s = scenario(name, &st.params()).unwrap();
    let (report, records) = verify_scenario(&s, &st).unwrap();
    let records_pass = records.into_iter().map(|r| (r.id, r.pass)).collect();
    Analyzed {
        report,
        records_pass,
    }
}

fn cached(name: &'static str) -> &'static Analyzed {
    static CELLS: [OnceLock<Analyzed>; 4] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    let idx = ["fig2a", "fig2b", "fig2c", "markov-saturating"]
        .iter()
        .position(|n| *n == name)
        .unwrap();
    CELLS[idx].get_or_init(|| analyzed(name))
}

fn record_pass(a: &Analyzed, id: &str) -> bool {
    a.records_pass
        .iter()
        .find(|(rid, _)| rid.ends_with(id))
        .map(|(_, pass)| *pass)
        .unwrap_or_else(|| panic!("no record {id}"))
}

fn markov_reports() -> &'static Vec<ProtocolReport> {
    static CELL: OnceLock<Vec<ProtocolReport>> = OnceLock::new();
    CELL.get_or_init(|| {
        let opt = settings().optimizer();
        (0..ENSEMBLE)
            .into_par_iter()
            .map(|seed| {
                let p = markov_random(2, 2, seed).unwrap();
                analyze(&p, &ctx(), &opt, &ALL_STRATEGIES).unwrap()
            })
            .collect()
    })
}

fn dilation_reports() -> &'static Vec<ProtocolReport> {
    static CELL: OnceLock<Vec<ProtocolReport>> = OnceLock::new();
    CELL.get_or_init(|| {
        let opt = settings().optimizer();
        let params = ScenarioParams::default();
        (0..ENSEMBLE)
            .into_par_iter()
            .map(|seed| {
                let p = random_process(2, 2, 2, seed, EnvInit::Random, &params).unwrap();
                analyze(&p, &ctx(), &opt, &ALL_STRATEGIES).unwrap()
            })
            .collect()
    })
}

/// Independent closed forms for the thermal qubit at E = kT = 1.
fn gamma1() -> f64 {
    let b = (-1f64).exp();
    b / (1.0 + b)
}

fn thermal_entropy() -> f64 {
    let g1 = gamma1();
    let g0 = 1.0 - g1;
    -(g0 * g0.ln() + g1 * g1.ln())
}

#[test]
fn criterion_1_swap_flip_process() {
    let a = cached("fig2a");
    let r = &a.report;
    let seq_target = 1.0 - (-1f64).exp();
    let dwi_target = (-1f64).exp();
    let ok = verdict(
        1,
        &[
            item(
                format!("w_seq {:.9} vs {seq_target:.9} tol 1e-6", r.w_seq.value),
                (r.w_seq.value - seq_target).abs() <= 1e-6,
            ),
            item(
                format!("w_joint {:.9} vs 1 tol 1e-3", r.w_joint.value),
                (r.w_joint.value - 1.0).abs() <= 1e-3,
            ),
            item(
                format!("d_wi {:.9} vs {dwi_target:.9} tol 2e-3", r.gaps.d_wi),
                (r.gaps.d_wi - dwi_target).abs() <= 2e-3,
            ),
            item("bound.wi record".into(), record_pass(a, ":bound.wi")),
        ],
    );
    assert!(ok, "criterion 1 failed");
}

#[test]
fn criterion_2_locally_thermal_environment() {
    let a = cached("fig2b");
    let r = &a.report;
    let two_s = 2.0 * thermal_entropy();
    let nm = &r.nm;
    let ok = verdict(
        2,
        &[
            item(
                format!("w_seq {:.3e} <= 1e-4", r.w_seq.value),
                r.w_seq.value <= 1e-4,
            ),
            item(
                format!("w_joint {:.3e} <= 1e-4", r.w_joint.value),
                r.w_joint.value <= 1e-4,
            ),
            item(
                format!("w_global {:.9} vs 2S {two_s:.9} tol 1e-3", r.w_global.value),
                (r.w_global.value - two_s).abs() <= 1e-3,
            ),
            item(
                format!("nm width {:.3e} <= 2e-3", nm.width()),
                nm.width() <= 2e-3,
            ),
            item(
                format!("nm [{:.9}, {:.9}] vs 2S tol 2e-3", nm.lower, nm.upper),
                (nm.lower - two_s).abs() <= 2e-3 && (nm.upper - two_s).abs() <= 2e-3,
            ),
            item(
                format!(
                    "|d_mtc - kT N| {:.3e} <= 3e-3",
                    (r.gaps.d_mtc - nm.upper).abs()
                ),
                (r.gaps.d_mtc - nm.upper).abs() <= 3e-3,
            ),
        ],
    );
    assert!(ok, "criterion 2 failed");
}

#[test]
fn criterion_3_feedthrough_process() {
    let a = cached("fig2c");
    let r = &a.report;
    let g1 = gamma1();
    let sec = r.gaps.d_sec.0;
    let ok = verdict(
        3,
        &[
            item(
                format!("comb lower {:.9} >= 1 - 1e-6", r.w_comb.lower.value),
                r.w_comb.lower.value >= 1.0 - 1e-6,
            ),
            item(
                format!(
                    "w_global {:.9} <= 2g1 {:.9} + 1e-3",
                    r.w_global.value,
                    2.0 * g1
                ),
                r.w_global.value <= 2.0 * g1 + 1e-3,
            ),
            item(
                format!("d_sec lower {sec:.9} >= {:.9} > 0", 1.0 - 2.0 * g1 - 2e-3),
                sec >= 1.0 - 2.0 * g1 - 2e-3 && sec > 0.0,
            ),
            item("bound.sec record".into(), record_pass(a, ":bound.sec")),
        ],
    );
    assert!(ok, "criterion 3 failed");
}

#[test]
fn criterion_4_markov_collapse() {
    let reports = markov_reports();
    let mut items = Vec::new();
    for (seed, r) in reports.iter().enumerate() {
        let vals = [
            r.w_seq.value,
            r.w_joint.value,
            r.w_global.value,
            r.w_comb.lower.value,
        ];
        let spread = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - vals.iter().copied().fold(f64::INFINITY, f64::min);
        items.push(item(
            format!("seed {seed} spread {spread:.2e}"),
            spread <= 2e-3,
        ));
        items.push(item(
            format!("seed {seed} nm_lower {:.2e}", r.nm.lower),
            r.nm.lower <= 1e-3,
        ));
    }
    assert!(verdict(4, &items), "criterion 4 failed");
}

#[test]
fn criterion_5_hierarchy() {
    let reports = dilation_reports();
    let mut items = Vec::new();
    for (seed, r) in reports.iter().enumerate() {
        let chain = r.w_seq.value <= r.w_joint.value + 3e-3
            && r.w_joint.value <= r.w_global.value + 3e-3
            && r.w_global.value <= r.w_comb.lower.value + 3e-3;
        let mtc = r.checks.iter().find(|c| c.id == "bound.mtc").unwrap();
        items.push(item(
            format!(
                "seed {seed} chain {:.4}<={:.4}<={:.4}<={:.4}",
                r.w_seq.value, r.w_joint.value, r.w_global.value, r.w_comb.lower.value
            ),
            chain,
        ));
        items.push(item(
            format!("seed {seed} bound.mtc margin {:.2e}", mtc.margin()),
            mtc.pass(),
        ));
    }
    assert!(verdict(5, &items), "criterion 5 failed");
}

#[test]
fn criterion_6_maximum_work() {
    let c = ctx();
    let cap = 2.0 * f_max(&c);
    let named = ["fig2a", "fig2b", "fig2c", "markov-saturating"].map(|n| &cached(n).report);
    let all = named
        .into_iter()
        .chain(markov_reports().iter())
        .chain(dilation_reports().iter());
    let mut worst = f64::NEG_INFINITY;
    for r in all {
        for w in [
            r.w_seq.value,
            r.w_joint.value,
            r.w_global.value,
            r.w_comb.lower.value,
        ]
        .into_iter()
        .chain(r.local_max.iter().map(|w| w.value))
        {
            worst = worst.max(w);
        }
    }
    let s = scenario("markov-saturating", &ScenarioParams::default()).unwrap();
    let (seq, inputs) = sequential_work(&s.process, &s.ctx, &settings().optimizer()).unwrap();
    let thermal_inputs = inputs
        .states
        .iter()
        .all(|x| x.matrix().max_abs_diff(s.ctx.gibbs().matrix()) < 1e-6);
    let ok = verdict(
        6,
        &[
            item(
                format!("max work {worst:.9} <= nFmax {cap:.9} + 1e-6"),
                worst <= cap + 1e-6,
            ),
            item(
                format!("saturating w_seq {:.9} vs {cap:.9} tol 1e-6", seq.value),
                (seq.value - cap).abs() <= 1e-6,
            ),
            item("saturating inputs thermal".into(), thermal_inputs),
        ],
    );
    assert!(ok, "criterion 6 failed");
}

#[test]
fn criterion_7_continuity_bound() {
    let r = continuity_record(CONTINUITY_SAMPLES, 42).unwrap();
    let ok = verdict(
        7,
        &[item(
            format!("{} violations in {CONTINUITY_SAMPLES} samples", r.lhs),
            r.pass && r.lhs == 0.0,
        )],
    );
    assert!(ok, "criterion 7 failed");
}

#[test]
fn criterion_8_entropic_core() {
    let mut rng = rng_for(8, 0);
    let mut self_err = 0f64;
    let mut add_err = 0f64;
    let mut dpi_violations = 0;
    let mut pinsker_violations = 0;
    for _ in 0..200 {
        let rho = random_density(2, &mut rng);
        let sigma = random_density(2, &mut rng);
        self_err = self_err.max(rel_entropy(&rho, &rho).unwrap().to_f64().abs());

        let (r2, s2) = (random_density(2, &mut rng), random_density(2, &mut rng));
        let joint = rel_entropy(&rho.tensor(&r2), &sigma.tensor(&s2))
            .unwrap()
            .to_f64();
        let parts =
            rel_entropy(&rho, &sigma).unwrap().to_f64() + rel_entropy(&r2, &s2).unwrap().to_f64();
        add_err = add_err.max((joint - parts).abs());

        let ch = random_channel(2, 2, 2, &mut rng);
        let before = rel_entropy(&rho, &sigma).unwrap().to_f64();
        let after = rel_entropy(&ch.apply(&rho).unwrap(), &ch.apply(&sigma).unwrap())
            .unwrap()
            .to_f64();
        if after > before + 1e-8 {
            dpi_violations += 1;
        }

        let t = trace_distance(&rho, &sigma).unwrap();
        if before < t * t / 2.0 {
            pinsker_violations += 1;
        }
    }
    let ok = verdict(
        8,
        &[
            item(
                format!("S(rho||rho) max {self_err:.1e} <= 1e-10"),
                self_err <= 1e-10,
            ),
            item(
                format!("additivity max err {add_err:.1e} <= 1e-9"),
                add_err <= 1e-9,
            ),
            item(
                format!("data processing violations {dpi_violations}"),
                dpi_violations == 0,
            ),
            item(
                format!("Pinsker violations {pinsker_violations}"),
                pinsker_violations == 0,
            ),
        ],
    );
    assert!(ok, "criterion 8 failed");
}
