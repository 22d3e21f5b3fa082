//! Dual domains 𝒴(y) and 𝒴(y,r), the dual value v(y,r) and w̃(y).
//!
//! Deflators are parametrized as Y = Σ_j λ_j Z^j over the vertex densities. Since V
//! is decreasing, the unspent budget (y,r) − Σ_j λ_j (1, p_j) may be taken to be zero,
//! so v is computed as a minimization over λ ≥ 0 with Σ_j λ_j (1, p_j) = (y, r).

use nalgebra::{DMatrix, DVector};
use num::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::exact::{dot, independent_rows, Rational};
use crate::geometry::{ConeKind, ConePair, MeasurePolytope};
use crate::ipm::{self, SeparableProblem};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::policy::NumericPolicy;
use crate::primal::SolveStatus;
use crate::scenario::{MarketScenario, OptionalProcess};
use crate::utility::UtilityField;

const FACE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub y: f64,
    pub r: Vec<f64>,
    /// Ŷ = Σ λ_j Z^j at every node.
    pub deflator: OptionalProcess,
    pub weights: Vec<f64>,
    #[serde(with = "crate::extended")]
    pub value: f64,
    pub slack_y: f64,
    pub slack_r: Vec<f64>,
    /// Supporting primal point (x̂, q̂) = −∇v(y, r).
    pub support_x: f64,
    pub support_q: Vec<f64>,
    /// Clock nodes not charged by any admissible vertex.
    pub trapped_nodes: Vec<usize>,
    pub status: SolveStatus,
    pub iterations: usize,
}

fn lifted(p: &[f64]) -> impl Iterator<Item = f64> + '_ {
    std::iter::once(1.0).chain(p.iter().copied())
}

/// Minimal violation t ≥ 0 such that Σλ_j Z^j + t ≥ Y on the clock support for some
/// admissible λ ≥ 0. `extra` adds linear constraints on λ.
fn domination_violation(
    scenario: &MarketScenario,
    polytope: &MeasurePolytope,
    target: &OptionalProcess,
    extra: impl Fn(&mut LinearProgram, usize),
) -> Result<f64> {
    if target.len() != scenario.n_nodes() {
        return Err(Error::InvalidInput(format!("process has {} values for {} nodes", target.len(), scenario.n_nodes())));
    }
    let jn = polytope.len();
    let mut c = vec![0.0; jn + 1];
    c[jn] = -1.0;
    let mut lp = LinearProgram::new(jn + 1).maximize(c);
    for n in scenario.clock_support() {
        let yn = target.0[n];
        if yn <= 0.0 {
            continue;
        }
        let mut row: Vec<f64> = polytope.densities().iter().map(|z| z.0[n]).collect();
        row.push(1.0);
        lp.constraint(row, Relation::Ge, yn);
    }
    extra(&mut lp, jn);
    match lp.solve() {
        LpOutcome::Optimal { value, .. } => Ok((-value).max(0.0)),
        LpOutcome::Infeasible => Ok(f64::INFINITY),
        LpOutcome::Unbounded => Err(Error::Convergence { iterations: 0, detail: "unbounded membership program".into() }),
    }
}

/// Distance-like violation for Y ∈ 𝒴(y); zero iff Y is dominated by an element of y·conv{Z^j}.
pub fn y_violation(scenario: &MarketScenario, polytope: &MeasurePolytope, target: &OptionalProcess, y: f64) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::InvalidInput(format!("y must be nonnegative, got {y}")));
    }
    domination_violation(scenario, polytope, target, |lp, jn| {
        let mut row = vec![1.0; jn];
        row.push(0.0);
        lp.constraint(row, Relation::Le, y);
    })
}

pub fn is_in_y(scenario: &MarketScenario, polytope: &MeasurePolytope, target: &OptionalProcess, y: f64, tol: f64) -> Result<bool> {
    Ok(y_violation(scenario, polytope, target, y)? <= tol)
}

fn check_l_closure(cones: &ConePair, y: f64, r: &[f64]) -> Result<Vec<f64>> {
    let mut point = vec![y];
    point.extend_from_slice(r);
    if point.len() != cones.dim() {
        return Err(Error::InvalidInput(format!("r has {} entries, expected {}", r.len(), cones.dim() - 1)));
    }
    if point.iter().any(|v| !v.is_finite()) || !cones.in_cone(&point, ConeKind::ClL)? {
        return Err(Error::Domain(format!("(y,r) = ({y}, {r:?}) lies outside cl ℒ; v ≜ +∞ there")));
    }
    Ok(point)
}

/// Violation for Y ∈ 𝒴(y,r): the slack (y,r) − Σλ_j(1,p_j) must stay in cl ℒ.
pub fn y_yr_violation(
    scenario: &MarketScenario,
    polytope: &MeasurePolytope,
    cones: &ConePair,
    target: &OptionalProcess,
    y: f64,
    r: &[f64],
) -> Result<f64> {
    let point = check_l_closure(cones, y, r)?;
    let exps = polytope.endowment_expectations();
    domination_violation(scenario, polytope, target, |lp, jn| {
        for g in cones.k_rays() {
            let gy: f64 = g.iter().zip(&point).map(|(a, b)| a * b).sum();
            let mut row: Vec<f64> = exps.iter().map(|p| g.iter().zip(lifted(p)).map(|(a, b)| a * b).sum()).collect();
            row.push(0.0);
            debug_assert_eq!(row.len(), jn + 1);
            lp.constraint(row, Relation::Le, gy.max(0.0));
        }
    })
}

pub fn is_in_y_yr(
    scenario: &MarketScenario,
    polytope: &MeasurePolytope,
    cones: &ConePair,
    target: &OptionalProcess,
    y: f64,
    r: &[f64],
    tol: f64,
) -> Result<bool> {
    Ok(y_yr_violation(scenario, polytope, cones, target, y, r)? <= tol)
}

/// Strictly positive λ with `eq · λ = rhs`, maximizing the smallest entry.
fn interior_start(eq: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let (k, j) = eq.shape();
    let mut c = vec![0.0; j + 1];
    c[j] = 1.0;
    let mut lp = LinearProgram::new(j + 1).maximize(c);
    for i in 0..k {
        let mut row: Vec<f64> = eq.row(i).iter().copied().collect();
        row.push(eq.row(i).sum());
        lp.constraint(row, Relation::Eq, rhs[i]);
    }
    match lp.solve() {
        LpOutcome::Optimal { x, .. } if x[j] > 0.0 => Some(DVector::from_fn(j, |i, _| x[i] + x[j])),
        _ => None,
    }
}

struct Reduced {
    /// Admissible vertex indices.
    vertices: Vec<usize>,
    /// Clock nodes charged by some admissible vertex.
    rows: Vec<usize>,
    trapped: Vec<usize>,
}

fn reduce(scenario: &MarketScenario, polytope: &MeasurePolytope, vertices: Vec<usize>) -> Reduced {
    let dens = polytope.densities();
    let (rows, trapped) =
        scenario.clock_support().into_iter().partition(|&n| vertices.iter().any(|&j| dens[j].0[n] > 0.0));
    Reduced { vertices, rows, trapped }
}

fn problem<'a>(
    scenario: &MarketScenario,
    polytope: &MeasurePolytope,
    field: &'a UtilityField,
    red: &Reduced,
    eq: DMatrix<f64>,
    eq_rhs: DVector<f64>,
) -> SeparableProblem<'a> {
    let w = scenario.clock_weights();
    let dens = polytope.densities();
    SeparableProblem {
        field,
        nodes: red.rows.clone(),
        weights: red.rows.iter().map(|&n| w[n]).collect(),
        z: DMatrix::from_fn(red.rows.len(), red.vertices.len(), |r, c| dens[red.vertices[c]].0[red.rows[r]]),
        cost: DVector::zeros(red.vertices.len()),
        eq,
        eq_rhs,
    }
}

fn trapped_value(scenario: &MarketScenario, field: &UtilityField, trapped: &[usize]) -> f64 {
    let w = scenario.clock_weights();
    trapped.iter().map(|&n| w[n] * field.v(n, 0.0)).sum()
}

pub fn solve_dual(
    scenario: &MarketScenario,
    polytope: &MeasurePolytope,
    cones: &ConePair,
    field: &UtilityField,
    y: f64,
    r: &[f64],
    policy: &NumericPolicy,
) -> Result<DualSolution> {
    let point = check_l_closure(cones, y, r)?;
    let jn = polytope.len();
    let scale = point.iter().fold(1.0f64, |m, v| m.max(v.abs()));

    // Restrict to the smallest face of cl ℒ containing (y, r).
    let exact_exp = polytope.exact_endowment_expectations();
    let lift_exact = |p: &[Rational]| {
        let mut row = vec![Rational::from_integer(1.into())];
        row.extend(p.iter().cloned());
        row
    };
    let mut admissible = vec![true; jn];
    for (g, ge) in cones.k_rays().iter().zip(cones.exact_k_rays()) {
        let gy: f64 = g.iter().zip(&point).map(|(a, b)| a * b).sum();
        if gy.abs() <= FACE_TOL * scale {
            for (j, p) in exact_exp.iter().enumerate() {
                if dot(ge, &lift_exact(p)).is_positive() {
                    admissible[j] = false;
                }
            }
        }
    }
    let red = reduce(scenario, polytope, (0..jn).filter(|&j| admissible[j]).collect());
    let restricted = red.vertices.len() < jn || !red.trapped.is_empty();
    let trapped = trapped_value(scenario, field, &red.trapped);

    let exact_rows: Vec<Vec<Rational>> = (0..point.len())
        .map(|i| red.vertices.iter().map(|&j| lift_exact(&exact_exp[j])[i].clone()).collect())
        .collect();
    let kept: Vec<usize> = if red.vertices.is_empty() { Vec::new() } else { independent_rows(&exact_rows) };
    let exps = polytope.endowment_expectations();
    let eq = DMatrix::from_fn(kept.len(), red.vertices.len(), |i, c| lifted(&exps[red.vertices[c]]).nth(kept[i]).unwrap_or(0.0));
    let eq_rhs = DVector::from_iterator(kept.len(), kept.iter().map(|&i| point[i]));

    let n_nodes = scenario.n_nodes();
    let finish = |lambda_red: &DVector<f64>, nu: &DVector<f64>, value: f64, status, iterations| {
        let mut weights = vec![0.0; jn];
        for (k, &j) in red.vertices.iter().enumerate() {
            weights[j] = lambda_red[k];
        }
        let mut defl = vec![0.0; n_nodes];
        for (j, z) in polytope.densities().iter().enumerate() {
            if weights[j] != 0.0 {
                for (d, zv) in defl.iter_mut().zip(z.values()) {
                    *d += weights[j] * zv;
                }
            }
        }
        let mut support = vec![0.0; point.len()];
        for (i, &row) in kept.iter().enumerate() {
            support[row] = nu[i];
        }
        let spent: Vec<f64> = (0..point.len())
            .map(|i| weights.iter().zip(exps).map(|(l, p)| l * lifted(p).nth(i).unwrap_or(0.0)).sum())
            .collect();
        DualSolution {
            y,
            r: r.to_vec(),
            deflator: OptionalProcess(defl),
            weights,
            value,
            slack_y: point[0] - spent[0],
            slack_r: (1..point.len()).map(|i| point[i] - spent[i]).collect(),
            support_x: support[0],
            support_q: support[1..].to_vec(),
            trapped_nodes: red.trapped.clone(),
            status,
            iterations,
        }
    };

    if red.vertices.is_empty() {
        let status = if trapped == f64::INFINITY { SolveStatus::ValuePlusInfinity } else { SolveStatus::BoundaryDegenerate };
        return Ok(finish(&DVector::zeros(0), &DVector::zeros(kept.len()), trapped, status, 0));
    }
    let start = interior_start(&eq, &eq_rhs).ok_or_else(|| Error::Convergence {
        iterations: 0,
        detail: format!("no strictly positive representation of (y,r) = ({y}, {r:?})"),
    })?;
    if trapped == f64::INFINITY {
        return Ok(finish(&start, &DVector::zeros(kept.len()), f64::INFINITY, SolveStatus::ValuePlusInfinity, 0));
    }
    let prob = problem(scenario, polytope, field, &red, eq, eq_rhs);
    let out = ipm::minimize(&prob, start, policy.max_iterations)?;
    let status = if restricted { SolveStatus::BoundaryDegenerate } else { SolveStatus::Optimal };
    Ok(finish(&out.lambda, &out.nu, out.objective + trapped, status, out.iterations))
}

/// w̃(y) = inf over 𝒴(y) of E[∫V(Y) dκ].
pub fn value_wtilde(
    scenario: &MarketScenario,
    polytope: &MeasurePolytope,
    field: &UtilityField,
    y: f64,
    policy: &NumericPolicy,
) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::InvalidInput(format!("w̃ is defined for y > 0, got {y}")));
    }
    if !polytope.has_equivalent() {
        return Err(Error::Arbitrage("ℳ = ∅ violates the no-arbitrage hypothesis".into()));
    }
    let jn = polytope.len();
    let red = reduce(scenario, polytope, (0..jn).collect());
    let prob = problem(scenario, polytope, field, &red, DMatrix::from_element(1, jn, 1.0), DVector::from_element(1, y));
    let out = ipm::minimize(&prob, DVector::from_element(jn, y / jn as f64), policy.max_iterations)?;
    Ok(out.objective + trapped_value(scenario, field, &red.trapped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn setup(s: &MarketScenario) -> (MeasurePolytope, ConePair) {
        let p = MeasurePolytope::enumerate(s, 10_000).unwrap();
        let c = ConePair::build(&p, 10_000).unwrap();
        (p, c)
    }

    #[test]
    fn deterministic_value() {
        let s = fixtures::det1();
        let (p, c) = setup(&s);
        let sol = solve_dual(&s, &p, &c, &UtilityField::log(), 2.0, &[], &NumericPolicy::default()).unwrap();
        assert!((sol.value - (-(2f64.ln()) - 1.0)).abs() < 1e-10);
        assert!((sol.support_x - 0.5).abs() < 1e-8);
    }

    #[test]
    fn binomial_closed_form() {
        let s = fixtures::bin1();
        let (p, c) = setup(&s);
        for y in [0.5, 1.0, 3.0] {
            let sol = solve_dual(&s, &p, &c, &UtilityField::log(), y, &[], &NumericPolicy::default()).unwrap();
            let exact = -y.ln() - 1.0 + 0.5 * (9.0f64 / 8.0).ln();
            assert!((sol.value - exact).abs() < 1e-10, "{y}: {} vs {exact}", sol.value);
            let wt = value_wtilde(&s, &p, &UtilityField::log(), y, &NumericPolicy::default()).unwrap();
            assert!((wt - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn membership_examples() {
        let s = fixtures::bin1();
        let (p, _) = setup(&s);
        let leaves = s.tree().leaves();
        let mut yp = OptionalProcess::zeros(s.n_nodes());
        yp.0[leaves[0]] = 1.0;
        yp.0[leaves[1]] = 2.0;
        assert!(!is_in_y(&s, &p, &yp, 1.0, 1e-9).unwrap());
        assert!(is_in_y(&s, &p, &OptionalProcess::zeros(s.n_nodes()), 0.0, 1e-9).unwrap());
        assert!(is_in_y(&s, &p, p.density_process(0).unwrap(), 1.0, 1e-9).unwrap());

        let t = fixtures::tri1();
        let (p, c) = setup(&t);
        let j13 = p.endowment_expectations().iter().position(|e| (e[0] - 1.0 / 3.0).abs() < 1e-12).unwrap();
        let z = p.density_process(j13).unwrap().clone();
        assert!(!is_in_y_yr(&t, &p, &c, &z, 1.0, &[0.0], 1e-9).unwrap());
        assert!(is_in_y_yr(&t, &p, &c, &z, 1.0, &[1.0 / 3.0], 1e-9).unwrap());
        assert!(is_in_y_yr(&t, &p, &c, &OptionalProcess::zeros(t.n_nodes()), 1.0, &[0.2], 1e-9).unwrap());
        assert!(is_in_y_yr(&t, &p, &c, &z, 1.0, &[0.5], 1e-9).is_err());
    }

    #[test]
    fn face_of_trinomial_cone() {
        let t = fixtures::tri1();
        let (p, c) = setup(&t);
        let pol = NumericPolicy::default();
        // (1, 0) lies on the ray generated by the vertex with p = 0; only the middle leaf is charged.
        let sol = solve_dual(&t, &p, &c, &UtilityField::log(), 1.0, &[0.0], &pol).unwrap();
        assert_eq!(sol.status, SolveStatus::ValuePlusInfinity);
        let sol = solve_dual(&t, &p, &c, &UtilityField::power(-1.0).unwrap(), 1.0, &[0.0], &pol).unwrap();
        assert_eq!(sol.status, SolveStatus::BoundaryDegenerate);
        assert!(sol.value.is_finite());
        let sol = solve_dual(&t, &p, &c, &UtilityField::log(), 1.0, &[0.2], &pol).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.slack_y.abs() < 1e-12 && sol.slack_r[0].abs() < 1e-12);
    }
}
