//! Numerical checks of weak duality, biconjugacy, the first-order characterization of
//! the subdifferential, semicontinuity, the bipolar characterizations and the cone
//! geometry, plus independent brute-force oracles for small trees.

pub mod checks;
pub mod membership;
pub mod oracle;
pub mod probes;

use serde::{Deserialize, Serialize};

pub use checks::{
    verify_biconjugacy, verify_bipolar, verify_finiteness, verify_foc, verify_geometry, verify_semicontinuity,
    verify_weak_duality,
};
pub use oracle::{brute_force_dual, brute_force_primal};

use crate::instance::Instance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// The relation being checked.
    pub statement: String,
    pub probes: usize,
    #[serde(with = "crate::extended")]
    pub worst_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// The first few offending probes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckRecord>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn new(checks: Vec<CheckRecord>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self { checks, passed }
    }

    pub fn get(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const MAX_LISTED: usize = 5;

/// Accumulates residuals for one check.
#[derive(Debug, Clone)]
pub(crate) struct Tally {
    name: String,
    statement: String,
    tolerance: f64,
    probes: usize,
    worst: f64,
    failures: Vec<String>,
    failed: bool,
    skipped: usize,
    skip_reason: Option<String>,
}

impl Tally {
    pub fn new(name: &str, statement: &str, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            statement: statement.into(),
            tolerance,
            probes: 0,
            worst: 0.0,
            failures: Vec::new(),
            failed: false,
            skipped: 0,
            skip_reason: None,
        }
    }

    /// Records a residual; the probe fails when it exceeds the tolerance or is NaN.
    pub fn residual(&mut self, value: f64, label: impl FnOnce() -> String) {
        self.probes += 1;
        if value.is_nan() || value > self.worst {
            self.worst = value;
        }
        if !(value <= self.tolerance) {
            self.fail(label());
        }
    }

    pub fn error(&mut self, label: String) {
        self.probes += 1;
        self.fail(label);
    }

    fn fail(&mut self, label: String) {
        self.failed = true;
        if self.failures.len() < MAX_LISTED {
            self.failures.push(label);
        }
    }

    pub fn skip(&mut self, reason: String) {
        self.skipped += 1;
        self.skip_reason.get_or_insert(reason);
    }

    pub fn finish(self) -> CheckRecord {
        let skipped = if self.probes == 0 {
            Some(self.skip_reason.unwrap_or_else(|| "no probes".into()))
        } else if self.skipped > 0 {
            Some(format!("{} probes skipped: {}", self.skipped, self.skip_reason.unwrap_or_default()))
        } else {
            None
        };
        CheckRecord {
            name: self.name,
            statement: self.statement,
            probes: self.probes,
            worst_residual: self.worst,
            tolerance: self.tolerance,
            passed: !self.failed,
            skipped,
            note: None,
            failures: self.failures,
        }
    }
}

/// Runs every check with the probe densities of the instance's policy.
pub fn run_suite(inst: &Instance) -> VerificationReport {
    let pol = &inst.policy;
    let mut checks = Vec::new();
    checks.extend(verify_geometry(inst, 500, pol.seed));
    checks.push(verify_weak_duality(inst, pol.weak_duality_grid, pol.seed));
    checks.extend(verify_biconjugacy(inst, pol.biconjugacy_grid, pol.seed));
    let points = probes::interior_k(&inst.cones, pol.foc_points, pol.seed ^ 0xf0c);
    checks.extend(verify_foc(inst, &points));
    checks.extend(verify_semicontinuity(inst, 4, pol.semicontinuity_directions, pol.semicontinuity_steps, pol.seed));
    checks.push(verify_finiteness(inst, pol.seed));
    if inst.scenario.clock_support().len() <= 64 && inst.polytope.len() <= 200 {
        checks.extend(verify_bipolar(inst, 100, pol.seed));
    }
    VerificationReport::new(checks)
}
