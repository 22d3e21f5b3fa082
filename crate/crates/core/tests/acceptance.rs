//! Acceptance suite: one pass/fail line per criterion.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use udual::fixtures::{self, RandomTreeSpec};
use udual::verify::{self, brute_force_dual, brute_force_primal, probes, CheckRecord};
use udual::{Error, Instance, NumericPolicy, UtilityField};

const RANDOM_TREES: usize = 20;
const TINY_TREES: usize = 10;
const MAX_VERTICES: usize = 40;

struct Outcome {
    passed: bool,
    summary: String,
}

fn fixture_instances() -> Vec<(String, Instance)> {
    fixtures::shipped()
        .into_iter()
        .map(|f| (f.name.clone().unwrap(), Instance::from_file(&f, NumericPolicy::default()).unwrap()))
        .collect()
}

/// Fixtures under the other admitted utility families.
fn fixture_variants() -> Vec<(String, Instance)> {
    let mut out = fixture_instances();
    for (name, s) in [("DET1", fixtures::det1()), ("BIN1", fixtures::bin1()), ("TRI1", fixtures::tri1())] {
        for g in [0.5, -1.0] {
            let f = UtilityField::power(g).unwrap();
            out.push((format!("{name}/γ={g}"), Instance::new(s.clone(), f, NumericPolicy::default()).unwrap()));
        }
    }
    out
}

fn random_instances(spec: RandomTreeSpec, count: usize, first_seed: u64) -> Vec<(String, Instance)> {
    let policy = NumericPolicy { vertex_cap: MAX_VERTICES, ..NumericPolicy::default() };
    let mut out = Vec::new();
    let mut seed = first_seed;
    while out.len() < count {
        let f = fixtures::random_file(seed, spec);
        match Instance::from_file(&f, policy.clone()) {
            Ok(mut inst) => {
                inst.policy.vertex_cap = NumericPolicy::default().vertex_cap;
                out.push((format!("random-{seed}"), inst));
            }
            Err(Error::Capacity { .. }) => {}
            Err(e) => panic!("random tree {seed} failed to build: {e}"),
        }
        seed += 1;
    }
    out
}

fn worst(records: &[CheckRecord]) -> f64 {
    records.iter().map(|r| r.worst_residual).fold(0.0, f64::max)
}

fn failures(records: &[(String, CheckRecord)]) -> String {
    records
        .iter()
        .filter(|(_, r)| !r.passed)
        .take(3)
        .map(|(n, r)| format!("{n}:{} {:?}", r.name, r.failures.first()))
        .collect::<Vec<_>>()
        .join("; ")
}

fn collect(insts: &[(String, Instance)], f: impl Fn(&Instance) -> Vec<CheckRecord>) -> Vec<(String, CheckRecord)> {
    insts.iter().flat_map(|(n, i)| f(i).into_iter().map(move |r| (n.clone(), r))).collect()
}

fn outcome(records: Vec<(String, CheckRecord)>, extra_ok: bool, extra: String) -> Outcome {
    let rs: Vec<CheckRecord> = records.iter().map(|(_, r)| r.clone()).collect();
    let passed = extra_ok && rs.iter().all(|r| r.passed && r.probes > 0);
    let probes: usize = rs.iter().map(|r| r.probes).sum();
    let mut summary = format!("{} records, {probes} probes, worst residual {:.2e}{extra}", rs.len(), worst(&rs));
    if !passed {
        summary.push_str(&format!(" | {}", failures(&records)));
    }
    Outcome { passed, summary }
}

fn weak_duality() -> Outcome {
    let mut slowest = Duration::ZERO;
    let mut records = Vec::new();
    for (n, inst) in fixture_instances() {
        let t = Instant::now();
        records.push((n, verify::verify_weak_duality(&inst, 20, 42)));
        slowest = slowest.max(t.elapsed());
    }
    let fast = slowest < Duration::from_secs(10);
    outcome(records, fast, format!(", slowest fixture {:.2}s (limit 10s)", slowest.as_secs_f64()))
}

fn biconjugacy(random: &[(String, Instance)]) -> Outcome {
    let t = Instant::now();
    let mut insts = fixture_instances();
    insts.extend(random.iter().cloned());
    let records = collect(&insts, |i| verify::verify_biconjugacy(i, 5, 42));
    let el = t.elapsed();
    outcome(records, el < Duration::from_secs(120), format!(", {:.1}s total (limit 120s)", el.as_secs_f64()))
}

fn foc(random: &[(String, Instance)]) -> Outcome {
    let mut plan: Vec<(String, Instance, usize)> = Vec::new();
    for (n, i) in fixture_instances() {
        let k = if n == "TRI1" { 10 } else { 5 };
        plan.push((n, i, k));
    }
    for (n, i) in random.iter().take(10) {
        plan.push((n.clone(), i.clone(), 3));
    }
    let total: usize = plan.iter().map(|p| p.2).sum();
    assert_eq!(total, 50);
    let mut records = Vec::new();
    for (k, (n, inst, count)) in plan.into_iter().enumerate() {
        let pts = probes::interior_k(&inst.cones, count, 500 + k as u64);
        records.extend(verify::verify_foc(&inst, &pts).into_iter().map(|r| (n.clone(), r)));
    }
    let skipped = records.iter().any(|(_, r)| r.skipped.is_some());
    outcome(records, !skipped, format!(", {total} points"))
}

fn bipolar(tiny: &[(String, Instance)]) -> Outcome {
    let per = 1000 / tiny.len();
    let records = collect(tiny, |i| verify::verify_bipolar(i, per, 7));
    let trials: usize = records.iter().map(|(_, r)| r.probes).sum();
    let members: Vec<String> = records.iter().filter_map(|(_, r)| r.note.clone()).take(2).collect();
    outcome(records, trials >= 2000, format!(", {trials} trials over both sets, e.g. {members:?}"))
}

fn oracles(tiny: &[(String, Instance)]) -> Outcome {
    let mut worst_gap: f64 = 0.0;
    let mut problems = Vec::new();
    let mut count = 0;
    let mut insts = fixture_instances();
    insts.extend(tiny.iter().cloned());
    for (k, (name, inst)) in insts.iter().enumerate() {
        for z in probes::interior_k(&inst.cones, 3, 900 + k as u64) {
            let a = inst.u(z[0], &z[1..]).unwrap();
            let b = brute_force_primal(inst, z[0], &z[1..], 1).unwrap();
            worst_gap = worst_gap.max((a - b).abs());
            count += 1;
            if !((a - b).abs() <= 1e-4) {
                problems.push(format!("{name} u{z:?}: solver {a} oracle {b}"));
            }
        }
        for z in probes::interior_l(&inst.cones, 3, 950 + k as u64) {
            let a = inst.v(z[0], &z[1..]).unwrap();
            let b = brute_force_dual(inst, z[0], &z[1..], 1).unwrap();
            worst_gap = worst_gap.max((a - b).abs());
            count += 1;
            if !((a - b).abs() <= 1e-4) {
                problems.push(format!("{name} v{z:?}: solver {a} oracle {b}"));
            }
        }
    }
    let bin = Instance::from_file(&fixtures::bin1_file(), NumericPolicy::default()).unwrap();
    let c = 0.5 * (9.0f64 / 8.0).ln();
    let mut closed: f64 = (bin.u(1.0, &[]).unwrap() - c).abs();
    for y in [0.25, 0.5, 1.0, 2.0, 4.0] {
        closed = closed.max((bin.v(y, &[]).unwrap() - (-y.ln() - 1.0 + c)).abs());
    }
    let passed = problems.is_empty() && closed <= 1e-6;
    let mut summary = format!(
        "{count} oracle comparisons, worst |solver − oracle| {worst_gap:.2e} (tol 1e-4); BIN1 closed forms err {closed:.2e} (tol 1e-6)"
    );
    if !passed {
        summary.push_str(&format!(" | {:?}", &problems[..problems.len().min(3)]));
    }
    Outcome { passed, summary }
}

fn finiteness(random: &[(String, Instance)], tiny: &[(String, Instance)]) -> Outcome {
    let mut insts = fixture_variants();
    insts.extend(random.iter().cloned());
    insts.extend(tiny.iter().cloned());
    let records = collect(&insts, |i| vec![verify::verify_finiteness(i, 42)]);
    let n = insts.len();
    outcome(records, true, format!(", {n} instances, counterexamples counted as residual"))
}

fn semicontinuity(random: &[(String, Instance)]) -> Outcome {
    let mut insts = fixture_variants();
    insts.extend(random.iter().take(10).cloned());
    let records = collect(&insts, |i| verify::verify_semicontinuity(i, 4, 8, 6, 42));
    outcome(records, true, String::new())
}

fn geometry(random: &[(String, Instance)]) -> Outcome {
    let mut insts = fixture_instances();
    insts.extend(random.iter().cloned());
    let records = collect(&insts, |i| verify::verify_geometry(i, 500, 42));
    let rejected = matches!(
        Instance::new(fixtures::arbitrage_market(), UtilityField::log(), NumericPolicy::default()),
        Err(Error::Arbitrage(_))
    );
    outcome(records, rejected, format!(", arbitrage market rejected: {rejected}"))
}

fn main() -> ExitCode {
    let random = random_instances(RandomTreeSpec::medium(), RANDOM_TREES, 1000);
    let tiny = random_instances(RandomTreeSpec::tiny(), TINY_TREES, 5000);
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 weak duality", Box::new(weak_duality)),
        ("2 biconjugacy", Box::new(|| biconjugacy(&random))),
        ("3 first-order conditions", Box::new(|| foc(&random))),
        ("4 bipolar membership", Box::new(|| bipolar(&tiny))),
        ("5 oracle equivalence", Box::new(|| oracles(&tiny))),
        ("6 finiteness equivalence", Box::new(|| finiteness(&random, &tiny))),
        ("7 semicontinuity", Box::new(|| semicontinuity(&random))),
        ("8 geometry", Box::new(|| geometry(&random))),
    ];
    let mut all = true;
    for (name, run) in criteria {
        let t = Instant::now();
        let o = run();
        all &= o.passed;
        println!("[{}] {name}: {} ({:.1}s)", if o.passed { "PASS" } else { "FAIL" }, o.summary, t.elapsed().as_secs_f64());
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
