use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances, caps and probe densities shared by the solvers and the verifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericPolicy {
    pub feasibility_tol: f64,
    pub stationarity_tol: f64,
    /// Relative tolerance on the gap between primal and Lagrangian values.
    pub gap_tol: f64,
    pub max_iterations: usize,
    pub vertex_cap: usize,
    /// Points per axis for the weak-duality probe grid.
    pub weak_duality_grid: usize,
    /// Points per axis for the biconjugacy grid.
    pub biconjugacy_grid: usize,
    pub semicontinuity_directions: usize,
    pub semicontinuity_steps: usize,
    pub foc_points: usize,
    pub seed: u64,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            stationarity_tol: 1e-8,
            gap_tol: 1e-6,
            max_iterations: 500,
            vertex_cap: 10_000,
            weak_duality_grid: 20,
            biconjugacy_grid: 5,
            semicontinuity_directions: 8,
            semicontinuity_steps: 6,
            foc_points: 10,
            seed: 42,
        }
    }
}

impl NumericPolicy {
    pub fn validate(&self) -> Result<()> {
        let tols = [
            ("feasibility_tol", self.feasibility_tol),
            ("stationarity_tol", self.stationarity_tol),
            ("gap_tol", self.gap_tol),
        ];
        for (name, v) in tols {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        let caps = [
            ("max_iterations", self.max_iterations),
            ("vertex_cap", self.vertex_cap),
            ("weak_duality_grid", self.weak_duality_grid),
            ("biconjugacy_grid", self.biconjugacy_grid),
            ("semicontinuity_directions", self.semicontinuity_directions),
            ("semicontinuity_steps", self.semicontinuity_steps),
            ("foc_points", self.foc_points),
        ];
        for (name, v) in caps {
            if v == 0 {
                return Err(Error::InvalidInput(format!("{name} must be a positive integer")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        NumericPolicy::default().validate().unwrap();
    }

    #[test]
    fn rejects_nonpositive() {
        let p = NumericPolicy { gap_tol: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
        let p = NumericPolicy { vertex_cap: 0, ..Default::default() };
        assert!(p.validate().is_err());
    }
}
