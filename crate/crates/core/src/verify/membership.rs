//! Membership in 𝒜(x,q) and 𝒴(y,r) through their bipolar descriptions, as linear
//! programs independent of the direct vertex tests.
//!
//! * c ∈ 𝒜(x,q) iff E[∫cY dκ] ≤ xy + q·r for every (y,r) ∈ cl ℒ and Y ∈ 𝒴(y,r).
//! * Y ∈ 𝒴(y,r) iff E[∫cY dκ] ≤ xy + q·r for every (x,q) ∈ cl 𝒦 and c ∈ 𝒜(x,q).
//!
//! Both suprema are normalized (y = 1, resp. a convex combination of the extreme rays
//! of cl 𝒦) so that the programs are bounded; a member has optimal value ≤ 0.

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::scenario::OptionalProcess;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lift(p: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(p.iter().copied()).collect()
}

fn optimum(out: LpOutcome) -> Result<f64> {
    match out {
        LpOutcome::Optimal { value, .. } => Ok(value),
        other => Err(Error::Convergence { iterations: 0, detail: format!("membership program ended {other:?}") }),
    }
}

/// sup over (1, r) ∈ cl ℒ and Y ∈ 𝒴(1, r) of E[∫cY dκ] − x − q·r.
pub fn consumption_dual_gap(inst: &Instance, c: &OptionalProcess, x: f64, q: &[f64]) -> Result<f64> {
    let usage = inst.polytope.budget_usage(&inst.scenario.clock_weights(), c.values());
    let exps = inst.polytope.endowment_expectations();
    let hull = inst.cones.p_set();
    let (jn, h, n) = (usage.len(), hull.len(), q.len());
    // Variables: λ (jn), θ (h), ν (h).
    let nv = jn + 2 * h;
    let mut obj = vec![0.0; nv];
    obj[..jn].copy_from_slice(&usage);
    for (k, p) in hull.iter().enumerate() {
        obj[jn + k] = -(x + dot(q, p));
    }
    let mut lp = LinearProgram::new(nv).maximize(obj);
    let mut row = vec![0.0; nv];
    row[..jn].iter_mut().for_each(|v| *v = 1.0);
    row[jn + h..].iter_mut().for_each(|v| *v = 1.0);
    lp.constraint(row, Relation::Eq, 1.0);
    let mut row = vec![0.0; nv];
    row[jn..jn + h].iter_mut().for_each(|v| *v = 1.0);
    lp.constraint(row, Relation::Eq, 1.0);
    for i in 0..n {
        let mut row = vec![0.0; nv];
        for j in 0..jn {
            row[j] = exps[j][i];
        }
        for k in 0..h {
            row[jn + k] = -hull[k][i];
            row[jn + h + k] = hull[k][i];
        }
        lp.constraint(row, Relation::Eq, 0.0);
    }
    optimum(lp.solve())
}

/// sup over (x,q) = Σ a_k g_k (a in the simplex over the extreme rays of cl 𝒦) and
/// c ∈ 𝒜(x,q) of E[∫cY dκ] − xy − q·r.
pub fn deflator_primal_gap(inst: &Instance, target: &OptionalProcess, y: f64, r: &[f64]) -> Result<f64> {
    let point: Vec<f64> = std::iter::once(y).chain(r.iter().copied()).collect();
    let w = inst.scenario.clock_weights();
    let nodes = inst.scenario.clock_support();
    let rays = inst.cones.k_rays();
    let (m, nr) = (nodes.len(), rays.len());
    let nv = m + nr;
    let mut obj = vec![0.0; nv];
    for (i, &n) in nodes.iter().enumerate() {
        obj[i] = w[n] * target.0[n];
    }
    for (k, g) in rays.iter().enumerate() {
        obj[m + k] = -dot(g, &point);
    }
    let mut lp = LinearProgram::new(nv).maximize(obj);
    for (z, p) in inst.polytope.densities().iter().zip(inst.polytope.endowment_expectations()) {
        let lp_row = lift(p);
        let mut row = vec![0.0; nv];
        for (i, &n) in nodes.iter().enumerate() {
            row[i] = w[n] * z.0[n];
        }
        for (k, g) in rays.iter().enumerate() {
            row[m + k] = -dot(g, &lp_row);
        }
        lp.constraint(row, Relation::Le, 0.0);
    }
    let mut row = vec![0.0; nv];
    row[m..].iter_mut().for_each(|v| *v = 1.0);
    lp.constraint(row, Relation::Eq, 1.0);
    optimum(lp.solve())
}

/// Largest s ≥ 0 with s·Y ∈ 𝒴(y,r), or +∞ when Y vanishes on the clock support.
pub fn deflator_capacity(inst: &Instance, target: &OptionalProcess, y: f64, r: &[f64]) -> Result<f64> {
    let point: Vec<f64> = std::iter::once(y).chain(r.iter().copied()).collect();
    let jn = inst.polytope.len();
    let dens = inst.polytope.densities();
    let exps = inst.polytope.endowment_expectations();
    let mut obj = vec![0.0; jn + 1];
    obj[jn] = 1.0;
    let mut lp = LinearProgram::new(jn + 1).maximize(obj);
    let mut any = false;
    for n in inst.scenario.clock_support() {
        if target.0[n] > 0.0 {
            any = true;
            let mut row: Vec<f64> = dens.iter().map(|z| z.0[n]).collect();
            row.push(-target.0[n]);
            lp.constraint(row, Relation::Ge, 0.0);
        }
    }
    if !any {
        return Ok(f64::INFINITY);
    }
    for g in inst.cones.k_rays() {
        let mut row: Vec<f64> = exps.iter().map(|p| dot(g, &lift(p))).collect();
        row.push(0.0);
        lp.constraint(row, Relation::Le, dot(g, &point).max(0.0));
    }
    match lp.solve() {
        LpOutcome::Optimal { value, .. } => Ok(value),
        LpOutcome::Unbounded => Ok(f64::INFINITY),
        LpOutcome::Infeasible => Ok(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::policy::NumericPolicy;
    use crate::utility::UtilityField;

    #[test]
    fn trinomial_routes() {
        let inst = Instance::new(fixtures::tri1(), UtilityField::log(), NumericPolicy::default()).unwrap();
        let dens = inst.polytope.densities();
        let j13 = inst.polytope.endowment_expectations().iter().position(|e| e[0] > 0.1).unwrap();
        let z = &dens[j13];
        assert!(deflator_primal_gap(&inst, z, 1.0, &[1.0 / 3.0]).unwrap() <= 1e-12);
        assert!(deflator_primal_gap(&inst, z, 1.0, &[0.0]).unwrap() > 1e-3);
        assert!((deflator_capacity(&inst, z, 1.0, &[1.0 / 3.0]).unwrap() - 1.0).abs() < 1e-12);

        let leaves = inst.scenario.tree().leaves();
        let mut c = OptionalProcess::zeros(inst.scenario.n_nodes());
        c.0[leaves[1]] = 1.0;
        assert!(consumption_dual_gap(&inst, &c, 1.0, &[0.0]).unwrap() <= 1e-12);
        assert!(consumption_dual_gap(&inst, &c, 0.9, &[0.0]).unwrap() > 1e-3);
    }
}
