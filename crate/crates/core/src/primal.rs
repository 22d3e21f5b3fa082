//! Consumption feasibility, the primal value u(x,q) and its maximizer.
//!
//! The primal is solved through its Lagrangian dual over the vertex budget
//! multipliers μ ≥ 0,
//!
//! ```text
//! u(x,q) = min_μ Σ_n w(n) V(n, Σ_j μ_j Z^j(n)) + Σ_j μ_j (x + q·p_j),
//! ```
//!
//! and the consumption is recovered pointwise as ĉ = I(Σ μ_j Z^j).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MeasurePolytope;
use crate::ipm::{self, SeparableProblem};
use crate::policy::NumericPolicy;
use crate::scenario::{MarketScenario, OptionalProcess};
use crate::utility::UtilityField;

/// Right-hand sides below this are treated as zero budgets.
pub const ZERO_BUDGET: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    ValueMinusInfinity,
    ValuePlusInfinity,
    /// A boundary point where part of the clock mass is forced to a corner.
    BoundaryDegenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    /// max_j (E_{Q_j}[∫c dκ] − x − q·p_j), negative when every budget has room.
    pub worst_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalSolution {
    pub x: f64,
    pub q: Vec<f64>,
    pub consumption: OptionalProcess,
    #[serde(with = "crate::extended")]
    pub value: f64,
    /// Value of the Lagrangian dual at the returned multipliers.
    #[serde(with = "crate::extended")]
    pub lagrangian_value: f64,
    pub multipliers: Vec<f64>,
    /// Subgradient (Σμ_j, Σμ_j p_j).
    pub y: f64,
    pub r: Vec<f64>,
    pub budget_slack: Vec<f64>,
    pub complementarity: f64,
    pub stationarity: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

fn budgets(polytope: &MeasurePolytope, x: f64, q: &[f64]) -> Vec<f64> {
    polytope
        .endowment_expectations()
        .iter()
        .map(|p| x + p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

fn check_dims(scenario: &MarketScenario, q: &[f64]) -> Result<()> {
    if q.len() != scenario.n_claims() {
        return Err(Error::InvalidInput(format!("q has {} entries, the scenario has {} claims", q.len(), scenario.n_claims())));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("q must be finite".into()));
    }
    Ok(())
}

fn domain_check(b: &[f64], x: f64, q: &[f64], tol: f64) -> Result<()> {
    let worst = b.iter().cloned().fold(f64::INFINITY, f64::min);
    if !x.is_finite() || worst < -tol {
        return Err(Error::Domain(format!(
            "(x,q) = ({x}, {q:?}) lies outside cl 𝒦 (min_j x + q·p_j = {worst:.3e}); u ≜ −∞ there"
        )));
    }
    Ok(())
}

/// Checks E_{Q_j}[∫c dκ] ≤ x + q·p_j + `tol` for every martingale vertex.
pub fn is_feasible_consumption(
    scenario: &MarketScenario,
    polytope: &MeasurePolytope,
    c: &OptionalProcess,
    x: f64,
    q: &[f64],
    tol: f64,
) -> Result<Feasibility> {
    check_dims(scenario, q)?;
    if c.len() != scenario.n_nodes() {
        return Err(Error::InvalidInput(format!("process has {} values for {} nodes", c.len(), scenario.n_nodes())));
    }
    if c.values().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput("consumption must be finite and nonnegative".into()));
    }
    let b = budgets(polytope, x, q);
    domain_check(&b, x, q, ZERO_BUDGET)?;
    let usage = polytope.budget_usage(&scenario.clock_weights(), c.values());
    let worst = usage.iter().zip(&b).map(|(u, b)| u - b).fold(f64::NEG_INFINITY, f64::max);
    Ok(Feasibility { feasible: worst <= tol, worst_violation: worst })
}

pub fn solve_primal(
    scenario: &MarketScenario,
    polytope: &MeasurePolytope,
    field: &UtilityField,
    x: f64,
    q: &[f64],
    policy: &NumericPolicy,
) -> Result<PrimalSolution> {
    check_dims(scenario, q)?;
    if !polytope.has_equivalent() {
        return Err(Error::Arbitrage("ℳ = ∅ violates the no-arbitrage hypothesis".into()));
    }
    let b = budgets(polytope, x, q);
    domain_check(&b, x, q, ZERO_BUDGET)?;
    let n_nodes = scenario.n_nodes();
    let w = scenario.clock_weights();
    let clock = scenario.clock_support();
    let dens = polytope.densities();
    let jn = polytope.len();

    let mut forced = vec![false; n_nodes];
    for j in 0..jn {
        if b[j] < ZERO_BUDGET {
            for &n in &clock {
                if dens[j].0[n] > 0.0 {
                    forced[n] = true;
                }
            }
        }
    }
    let zero_sol = |status, value| PrimalSolution {
        x,
        q: q.to_vec(),
        consumption: OptionalProcess::zeros(n_nodes),
        value,
        lagrangian_value: value,
        multipliers: vec![0.0; jn],
        y: 0.0,
        r: vec![0.0; q.len()],
        budget_slack: b.clone(),
        complementarity: 0.0,
        stationarity: 0.0,
        status,
        iterations: 0,
    };
    let mut forced_value = 0.0;
    for &n in &clock {
        if forced[n] {
            forced_value += w[n] * field.u_at_zero(n);
        }
    }
    if forced_value == f64::NEG_INFINITY {
        return Ok(zero_sol(SolveStatus::ValueMinusInfinity, f64::NEG_INFINITY));
    }
    let status = if forced.iter().any(|&f| f) { SolveStatus::BoundaryDegenerate } else { SolveStatus::Optimal };

    let free: Vec<usize> = clock.iter().copied().filter(|&n| !forced[n]).collect();
    let active: Vec<usize> =
        (0..jn).filter(|&j| b[j] >= ZERO_BUDGET && free.iter().any(|&n| dens[j].0[n] > 0.0)).collect();
    if free.is_empty() {
        return Ok(zero_sol(status, forced_value));
    }

    let z = DMatrix::from_fn(free.len(), active.len(), |r, c| dens[active[c]].0[free[r]]);
    let cost = DVector::from_iterator(active.len(), active.iter().map(|&j| b[j]));
    let problem = SeparableProblem {
        field,
        nodes: free.clone(),
        weights: free.iter().map(|&n| w[n]).collect(),
        z,
        cost,
        eq: DMatrix::zeros(0, active.len()),
        eq_rhs: DVector::zeros(0),
    };
    let ja = active.len() as f64;
    let zbar: Vec<f64> = (0..free.len()).map(|r| problem.z.row(r).sum() / ja).collect();
    let bbar = problem.cost.sum() / ja;
    let s = ipm::scalar_argmin(|s| {
        free.iter().enumerate().map(|(i, &n)| w[n] * field.v(n, s * zbar[i])).sum::<f64>() + s * bbar
    });
    let start = DVector::from_element(active.len(), s / ja);
    let out = ipm::minimize(&problem, start, policy.max_iterations)?;

    let mut mu = vec![0.0; jn];
    for (k, &j) in active.iter().enumerate() {
        mu[j] = out.lambda[k];
    }
    let deflator = &problem.z * &out.lambda;
    let mut c = vec![0.0; n_nodes];
    let mut stationarity: f64 = 0.0;
    let mut value = forced_value;
    for (i, &n) in free.iter().enumerate() {
        c[n] = field.inv(n, deflator[i]);
        value += w[n] * field.u(n, c[n]);
        stationarity = stationarity.max((field.marginal(n, c[n]) - deflator[i]).abs() / deflator[i]);
    }
    let lagrangian_value = out.objective + forced_value;
    let usage = polytope.budget_usage(&w, &c);
    let slack: Vec<f64> = b.iter().zip(&usage).map(|(b, u)| b - u).collect();
    let complementarity = mu.iter().zip(&slack).map(|(m, s)| (m * s).abs()).fold(0.0, f64::max);
    let gap = (lagrangian_value - value).abs();
    if !(gap <= policy.gap_tol * value.abs().max(1.0)) {
        return Err(Error::Convergence {
            iterations: out.iterations,
            detail: format!("primal/Lagrangian gap {gap:.3e} at (x,q) = ({x}, {q:?})"),
        });
    }
    let y: f64 = mu.iter().sum();
    let r = (0..q.len())
        .map(|i| mu.iter().zip(polytope.endowment_expectations()).map(|(m, p)| m * p[i]).sum())
        .collect();
    Ok(PrimalSolution {
        x,
        q: q.to_vec(),
        consumption: OptionalProcess(c),
        value,
        lagrangian_value,
        multipliers: mu,
        y,
        r,
        budget_slack: slack,
        complementarity,
        stationarity,
        status,
        iterations: out.iterations,
    })
}

/// w(x) = u(x, 0).
pub fn value_w(
    scenario: &MarketScenario,
    polytope: &MeasurePolytope,
    field: &UtilityField,
    x: f64,
    policy: &NumericPolicy,
) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidInput(format!("w is defined for x > 0, got {x}")));
    }
    Ok(solve_primal(scenario, polytope, field, x, &vec![0.0; scenario.n_claims()], policy)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn setup(s: &MarketScenario) -> MeasurePolytope {
        MeasurePolytope::enumerate(s, 10_000).unwrap()
    }

    #[test]
    fn deterministic_log() {
        let s = fixtures::det1();
        let p = setup(&s);
        let sol = solve_primal(&s, &p, &UtilityField::log(), 1.0, &[], &NumericPolicy::default()).unwrap();
        assert!(sol.value.abs() < 1e-10);
        assert!((sol.consumption.0[0] - 1.0).abs() < 1e-9);
        assert!((sol.y - 1.0).abs() < 1e-9);
    }

    #[test]
    fn binomial_closed_form() {
        let s = fixtures::bin1();
        let p = setup(&s);
        let sol = solve_primal(&s, &p, &UtilityField::log(), 1.0, &[], &NumericPolicy::default()).unwrap();
        assert!((sol.value - 0.5 * (9.0f64 / 8.0).ln()).abs() < 1e-10, "{}", sol.value);
        let leaves = s.tree().leaves();
        assert!((sol.consumption.0[leaves[0]] - 1.5).abs() < 1e-8);
        assert!((sol.consumption.0[leaves[1]] - 0.75).abs() < 1e-8);
    }

    #[test]
    fn binomial_feasibility_example() {
        let s = fixtures::bin1();
        let p = setup(&s);
        let leaves = s.tree().leaves();
        let mut c = OptionalProcess::zeros(s.n_nodes());
        c.0[leaves[0]] = 3.0;
        assert!(is_feasible_consumption(&s, &p, &c, 1.0, &[], 1e-9).unwrap().feasible);
        assert!(!is_feasible_consumption(&s, &p, &c, 0.9, &[], 1e-9).unwrap().feasible);
        assert!(is_feasible_consumption(&s, &p, &c, -0.1, &[], 1e-9).is_err());
    }

    #[test]
    fn boundary_statuses() {
        let s = fixtures::tri1();
        let p = setup(&s);
        let pol = NumericPolicy::default();
        let sol = solve_primal(&s, &p, &UtilityField::log(), 1.0, &[-3.0], &pol).unwrap();
        assert_eq!(sol.status, SolveStatus::ValueMinusInfinity);
        let sqrt = UtilityField::power(0.5).unwrap();
        let sol = solve_primal(&s, &p, &sqrt, 1.0, &[-3.0], &pol).unwrap();
        assert_eq!(sol.status, SolveStatus::BoundaryDegenerate);
        assert!(sol.value.is_finite());
        assert!(solve_primal(&s, &p, &sqrt, 1.0, &[-4.0], &pol).is_err());
    }

    #[test]
    fn w_is_log_shifted() {
        let s = fixtures::tri1();
        let p = setup(&s);
        let pol = NumericPolicy::default();
        let f = UtilityField::log();
        let w1 = value_w(&s, &p, &f, 1.0, &pol).unwrap();
        let w3 = value_w(&s, &p, &f, 3.0, &pol).unwrap();
        assert!((w3 - w1 - 3f64.ln()).abs() < 1e-9);
    }
}
