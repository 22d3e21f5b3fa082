//! Scenario ingestion, command dispatch and report emission for the `udual` binary.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use udual::dual::DualSolution;
use udual::geometry::{ConePair, MeasurePolytope};
use udual::primal::PrimalSolution;
use udual::scenario::format::parse_scenario;
use udual::scenario::{validate_scenario, Violation};
use udual::verify::{self, CheckRecord};
use udual::{Error, Instance, NumericPolicy};

/// Version tag of the machine-readable report layout.
pub const SCHEMA_VERSION: &str = "udual-report/1";

const DEFAULT_GRID: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Validate,
    Cones,
    SolvePrimal,
    SolveDual,
    W,
    Wtilde,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Json,
    Csv,
}

/// Command-line overrides. Unset fields fall back to the scenario file, then to defaults.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub x: Option<f64>,
    pub q: Option<Vec<f64>>,
    pub y: Option<f64>,
    pub r: Option<Vec<f64>>,
    pub grid: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub tol_feasibility: Option<f64>,
    pub tol_stationarity: Option<f64>,
    pub tol_gap: Option<f64>,
    pub max_iterations: Option<usize>,
    pub vertex_cap: Option<usize>,
    /// Record wall-clock timings in the report.
    pub timings: bool,
}

impl RunOptions {
    pub fn policy(&self) -> NumericPolicy {
        let mut p = NumericPolicy::default();
        if let Some(v) = self.tol_feasibility {
            p.feasibility_tol = v;
        }
        if let Some(v) = self.tol_stationarity {
            p.stationarity_tol = v;
        }
        if let Some(v) = self.tol_gap {
            p.gap_tol = v;
        }
        if let Some(v) = self.max_iterations {
            p.max_iterations = v;
        }
        if let Some(v) = self.vertex_cap {
            p.vertex_cap = v;
        }
        if let Some(v) = self.seed {
            p.seed = v;
        }
        p
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSummary {
    pub name: Option<String>,
    /// SHA-256 of the canonical (sorted-key, compact) JSON of the input file.
    pub digest: String,
    pub nodes: usize,
    pub leaves: usize,
    pub assets: usize,
    pub claims: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolytopeSummary {
    pub vertices: usize,
    pub has_equivalent: bool,
    pub l_open: bool,
    pub k_rays: usize,
    pub l_halfspaces: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeListing {
    pub vertices: Vec<Vec<f64>>,
    pub endowment_expectations: Vec<Vec<f64>>,
    pub k_rays: Vec<Vec<f64>>,
    pub k_lineality: Vec<Vec<f64>>,
    pub l_rays: Vec<Vec<f64>>,
    pub l_halfspaces: Vec<Vec<f64>>,
    pub l_equalities: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Computation {
    Primal {
        x: f64,
        q: Vec<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        solution: Option<PrimalSolution>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<ErrorRecord>,
    },
    Dual {
        y: f64,
        r: Vec<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        solution: Option<DualSolution>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<ErrorRecord>,
    },
    W {
        x: f64,
        #[serde(with = "udual::extended::option", skip_serializing_if = "Option::is_none", default)]
        value: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<ErrorRecord>,
    },
    Wtilde {
        y: f64,
        #[serde(with = "udual::extended::option", skip_serializing_if = "Option::is_none", default)]
        value: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<ErrorRecord>,
    },
}

impl Computation {
    fn error(&self) -> Option<&ErrorRecord> {
        match self {
            Computation::Primal { error, .. }
            | Computation::Dual { error, .. }
            | Computation::W { error, .. }
            | Computation::Wtilde { error, .. } => error.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub message: String,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        let kind = match e {
            Error::InvalidScenario(_) => "invalid_scenario",
            Error::UnknownNode(_) => "unknown_node",
            Error::InvalidInput(_) => "invalid_input",
            Error::Domain(_) => "domain",
            Error::Arbitrage(_) => "arbitrage",
            Error::Capacity { .. } => "capacity",
            Error::Convergence { .. } => "convergence",
            Error::Parse(_) => "parse",
        };
        Self { kind, message: e.to_string() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub setup_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    InputError,
}

impl Verdict {
    pub fn exit_code(self) -> u8 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::InputError => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub command: Command,
    pub seed: u64,
    pub policy: NumericPolicy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polytope: Option<PolytopeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cones: Option<ConeListing>,
    pub violations: Vec<Violation>,
    pub computations: Vec<Computation>,
    pub checks: Vec<CheckRecord>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl RunReport {
    pub fn exit_code(&self) -> u8 {
        self.verdict.exit_code()
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(self).expect("report serialization") + "\n",
            Format::Csv => render_csv(self),
            Format::Text => render_text(self),
        }
    }
}

/// SHA-256 hex digest of the sorted-key compact serialization of a JSON document.
pub fn canonical_digest(text: &str) -> Result<String, Error> {
    // serde_json's default map is ordered by key, so re-serializing canonicalizes.
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let canonical = serde_json::to_string(&value).expect("value serialization");
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

/// Reads the scenario at `path` and runs `command`.
pub fn run(command: Command, path: &Path, options: &RunOptions) -> RunReport {
    let policy = options.policy();
    match std::fs::read_to_string(path) {
        Ok(text) => run_text(command, &text, options),
        Err(e) => {
            let err = Error::InvalidInput(format!("cannot read {}: {e}", path.display()));
            failed(command, policy, None, &err)
        }
    }
}

/// Runs `command` on scenario text already in memory.
pub fn run_text(command: Command, text: &str, options: &RunOptions) -> RunReport {
    let start = Instant::now();
    let policy = options.policy();
    let mut report = match execute(command, text, options, &policy, start) {
        Ok(r) => r,
        Err((summary, e)) => failed(command, policy, summary, &e),
    };
    if options.timings {
        let setup = report.timings.as_ref().map_or(0.0, |t| t.setup_seconds);
        report.timings = Some(Timings { total_seconds: start.elapsed().as_secs_f64(), setup_seconds: setup });
    } else {
        report.timings = None;
    }
    report
}

fn failed(command: Command, policy: NumericPolicy, scenario: Option<ScenarioSummary>, e: &Error) -> RunReport {
    let verdict = match e {
        Error::Convergence { .. } => Verdict::Fail,
        _ => Verdict::InputError,
    };
    RunReport {
        schema: SCHEMA_VERSION,
        command,
        seed: policy.seed,
        policy,
        scenario,
        polytope: None,
        cones: None,
        violations: Vec::new(),
        computations: Vec::new(),
        checks: Vec::new(),
        verdict,
        error: Some(e.into()),
        timings: None,
    }
}

fn empty(command: Command, policy: NumericPolicy, scenario: ScenarioSummary) -> RunReport {
    RunReport {
        schema: SCHEMA_VERSION,
        command,
        seed: policy.seed,
        policy,
        scenario: Some(scenario),
        polytope: None,
        cones: None,
        violations: Vec::new(),
        computations: Vec::new(),
        checks: Vec::new(),
        verdict: Verdict::Pass,
        error: None,
        timings: None,
    }
}

fn polytope_summary(polytope: &MeasurePolytope, cones: &ConePair) -> PolytopeSummary {
    PolytopeSummary {
        vertices: polytope.len(),
        has_equivalent: polytope.has_equivalent(),
        l_open: cones.l_open(),
        k_rays: cones.k_rays().len(),
        l_halfspaces: cones.l_halfspaces().len(),
    }
}

type Failure = (Option<ScenarioSummary>, Error);

fn execute(
    command: Command,
    text: &str,
    options: &RunOptions,
    policy: &NumericPolicy,
    start: Instant,
) -> Result<RunReport, Failure> {
    policy.validate().map_err(|e| (None, e))?;
    let digest = canonical_digest(text).map_err(|e| (None, e))?;
    let file = parse_scenario(text).map_err(|e| (None, e))?;
    let scenario = file.to_scenario().map_err(|e| (None, e))?;
    let summary = ScenarioSummary {
        name: file.name.clone(),
        digest,
        nodes: scenario.n_nodes(),
        leaves: scenario.tree().leaves().len(),
        assets: scenario.n_assets(),
        claims: scenario.n_claims(),
    };
    let fail = |e: Error| (Some(summary.clone()), e);
    let mut report = empty(command, policy.clone(), summary.clone());

    let violations = validate_scenario(&scenario);
    if command == Command::Validate {
        if let Some(field) = file.utility_field().map_err(fail)? {
            if violations.is_empty() {
                field.validate_for(&scenario).map_err(fail)?;
            }
        }
        report.verdict = if violations.is_empty() { Verdict::Pass } else { Verdict::Fail };
        report.violations = violations;
        return Ok(report);
    }
    if !violations.is_empty() {
        let listed: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(fail(Error::InvalidScenario(listed.join("; "))));
    }

    if command == Command::Cones {
        let polytope = MeasurePolytope::enumerate(&scenario, policy.vertex_cap).map_err(fail)?;
        let cones = ConePair::build(&polytope, policy.vertex_cap).map_err(fail)?;
        report.polytope = Some(polytope_summary(&polytope, &cones));
        report.cones = Some(ConeListing {
            vertices: polytope.vertices().to_vec(),
            endowment_expectations: polytope.endowment_expectations().to_vec(),
            k_rays: cones.k_rays().to_vec(),
            k_lineality: cones.k_lineality().to_vec(),
            l_rays: cones.l_rays(),
            l_halfspaces: cones.l_halfspaces().to_vec(),
            l_equalities: cones.l_equalities().to_vec(),
        });
        return Ok(report);
    }

    let inst = Instance::from_file(&file, policy.clone()).map_err(fail)?;
    report.polytope = Some(polytope_summary(&inst.polytope, &inst.cones));
    let setup = start.elapsed().as_secs_f64();
    let n = inst.n_claims();
    let grid = || options.grid.clone();

    match command {
        Command::SolvePrimal => {
            let points = match options.x {
                Some(x) => vec![(x, options.q.clone().unwrap_or_default())],
                None => file.queries.primal.iter().map(|p| (p.x, p.q.clone())).collect(),
            };
            if points.is_empty() {
                return Err(fail(Error::InvalidInput("solve-primal needs --x (and --q) or primal queries in the file".into())));
            }
            for (x, q) in points {
                check_len("q", &q, n).map_err(fail)?;
                let (solution, error) = split(inst.primal(x, &q));
                report.computations.push(Computation::Primal { x, q, solution, error });
            }
        }
        Command::SolveDual => {
            let points = match options.y {
                Some(y) => vec![(y, options.r.clone().unwrap_or_default())],
                None => file.queries.dual.iter().map(|p| (p.y, p.r.clone())).collect(),
            };
            if points.is_empty() {
                return Err(fail(Error::InvalidInput("solve-dual needs --y (and --r) or dual queries in the file".into())));
            }
            for (y, r) in points {
                check_len("r", &r, n).map_err(fail)?;
                let (solution, error) = split(inst.dual(y, &r));
                report.computations.push(Computation::Dual { y, r, solution, error });
            }
        }
        Command::W => {
            let xs = grid().or_else(|| nonempty(&file.queries.w_grid)).unwrap_or_else(|| DEFAULT_GRID.to_vec());
            for x in xs {
                let (value, error) = split(inst.w(x));
                report.computations.push(Computation::W { x, value, error });
            }
        }
        Command::Wtilde => {
            let ys = grid().or_else(|| nonempty(&file.queries.wtilde_grid)).unwrap_or_else(|| DEFAULT_GRID.to_vec());
            for y in ys {
                let (value, error) = split(inst.wtilde(y));
                report.computations.push(Computation::Wtilde { y, value, error });
            }
        }
        Command::Verify => {
            let suite = verify::run_suite(&inst);
            report.checks = suite.checks;
            if !suite.passed {
                report.verdict = Verdict::Fail;
            }
        }
        Command::Validate | Command::Cones => unreachable!(),
    }

    if let Some(e) = report.computations.iter().filter_map(Computation::error).next() {
        report.verdict = if e.kind == "convergence" { Verdict::Fail } else { Verdict::InputError };
    }
    report.timings = Some(Timings { total_seconds: 0.0, setup_seconds: setup });
    Ok(report)
}

fn nonempty(v: &[f64]) -> Option<Vec<f64>> {
    (!v.is_empty()).then(|| v.to_vec())
}

fn check_len(name: &str, v: &[f64], n: usize) -> Result<(), Error> {
    if v.len() != n {
        return Err(Error::InvalidInput(format!("--{name} needs {n} values (one per claim), got {}", v.len())));
    }
    Ok(())
}

fn split<T>(r: Result<T, Error>) -> (Option<T>, Option<ErrorRecord>) {
    match r {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some((&e).into())),
    }
}

fn fmt_ext(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| fmt_ext(x)).collect();
    format!("[{}]", parts.join(", "))
}

fn render_text(r: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "command: {}", serde_json::to_value(r.command).unwrap().as_str().unwrap_or_default());
    if let Some(sc) = &r.scenario {
        let name = sc.name.as_deref().unwrap_or("(unnamed)");
        let _ = writeln!(
            s,
            "scenario: {name}  nodes={} leaves={} assets={} claims={}  sha256={}",
            sc.nodes, sc.leaves, sc.assets, sc.claims, sc.digest
        );
    }
    let _ = writeln!(s, "seed: {}", r.seed);
    if let Some(p) = &r.polytope {
        let _ = writeln!(
            s,
            "polytope: {} vertices, has_equivalent={}, L open={}, K rays={}, L half-spaces={}",
            p.vertices, p.has_equivalent, p.l_open, p.k_rays, p.l_halfspaces
        );
    }
    if let Some(c) = &r.cones {
        for (name, rows) in [
            ("vertex", &c.vertices),
            ("p", &c.endowment_expectations),
            ("K ray", &c.k_rays),
            ("K lineality", &c.k_lineality),
            ("L ray", &c.l_rays),
            ("L half-space", &c.l_halfspaces),
            ("L equality", &c.l_equalities),
        ] {
            for row in rows.iter() {
                let _ = writeln!(s, "  {name}: {}", fmt_vec(row));
            }
        }
    }
    if r.command == Command::Validate {
        if r.violations.is_empty() {
            let _ = writeln!(s, "violations: none");
        }
        for v in &r.violations {
            let _ = writeln!(s, "violation: {v}");
        }
    }
    for c in &r.computations {
        let line = match c {
            Computation::Primal { x, q, solution: Some(p), .. } => format!(
                "u({x}, {}) = {}  status={:?} iterations={} multipliers y={} r={}",
                fmt_vec(q),
                fmt_ext(p.value),
                p.status,
                p.iterations,
                fmt_ext(p.y),
                fmt_vec(&p.r)
            ),
            Computation::Dual { y, r, solution: Some(d), .. } => format!(
                "v({y}, {}) = {}  status={:?} iterations={}",
                fmt_vec(r),
                fmt_ext(d.value),
                d.status,
                d.iterations
            ),
            Computation::W { x, value: Some(v), .. } => format!("w({x}) = {}", fmt_ext(*v)),
            Computation::Wtilde { y, value: Some(v), .. } => format!("wtilde({y}) = {}", fmt_ext(*v)),
            other => format!("error: {}", other.error().map(|e| e.message.as_str()).unwrap_or("unknown")),
        };
        let _ = writeln!(s, "{line}");
    }
    for c in &r.checks {
        let mark = if c.skipped.is_some() {
            "SKIP"
        } else if c.passed {
            "PASS"
        } else {
            "FAIL"
        };
        let _ = writeln!(
            s,
            "[{mark}] {:<28} probes={:<6} worst={:.3e} tol={:.1e}",
            c.name, c.probes, c.worst_residual, c.tolerance
        );
        if let Some(reason) = &c.skipped {
            let _ = writeln!(s, "       skipped: {reason}");
        }
        for f in c.failures.iter().take(3) {
            let _ = writeln!(s, "       {f}");
        }
    }
    if let Some(e) = &r.error {
        let _ = writeln!(s, "error ({}): {}", e.kind, e.message);
    }
    if let Some(t) = &r.timings {
        let _ = writeln!(s, "time: {:.3}s (setup {:.3}s)", t.total_seconds, t.setup_seconds);
    }
    let _ = writeln!(s, "verdict: {}", serde_json::to_value(r.verdict).unwrap().as_str().unwrap_or_default());
    s
}

fn csv_field(v: &str) -> String {
    if v.contains([',', '"', '\n']) {
        format!("\"{}\"", v.replace('"', "\"\""))
    } else {
        v.to_string()
    }
}

fn render_csv(r: &RunReport) -> String {
    let mut rows: Vec<[String; 6]> = Vec::new();
    for v in &r.violations {
        rows.push([
            "violation".into(),
            v.invariant.to_string(),
            v.node.map(|n| n.to_string()).unwrap_or_default(),
            String::new(),
            v.detail.clone(),
            "fail".into(),
        ]);
    }
    for c in &r.computations {
        let (kind, point, value, status) = match c {
            Computation::Primal { x, q, solution, .. } => {
                let mut pt = vec![*x];
                pt.extend(q);
                ("u", pt, solution.as_ref().map(|s| s.value), solution.as_ref().map(|s| format!("{:?}", s.status)))
            }
            Computation::Dual { y, r, solution, .. } => {
                let mut pt = vec![*y];
                pt.extend(r);
                ("v", pt, solution.as_ref().map(|s| s.value), solution.as_ref().map(|s| format!("{:?}", s.status)))
            }
            Computation::W { x, value, .. } => ("w", vec![*x], *value, value.map(|_| "Optimal".to_string())),
            Computation::Wtilde { y, value, .. } => ("wtilde", vec![*y], *value, value.map(|_| "Optimal".to_string())),
        };
        let status = match c.error() {
            Some(e) => format!("error:{}", e.kind),
            None => status.unwrap_or_default(),
        };
        rows.push([
            "computation".into(),
            kind.into(),
            fmt_vec(&point),
            value.map(fmt_ext).unwrap_or_default(),
            String::new(),
            status,
        ]);
    }
    for c in &r.checks {
        let status = if c.skipped.is_some() {
            "skip"
        } else if c.passed {
            "pass"
        } else {
            "fail"
        };
        rows.push([
            "check".into(),
            c.name.clone(),
            c.probes.to_string(),
            format!("{:e}", c.worst_residual),
            format!("{:e}", c.tolerance),
            status.into(),
        ]);
    }
    let mut s = String::from("section,name,key,value,tolerance,status\n");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| csv_field(c)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    if let Some(e) = &r.error {
        let _ = writeln!(s, "error,{},,,,{}", e.kind, csv_field(&e.message));
    }
    s
}
