//! Martingale-measure polytope of a finite tree.
//!
//! The closed set of martingale measures factors over nodes: a leaf measure is an
//! extreme point iff its conditional law at every node it charges is an extreme point
//! of that node's one-step martingale polytope. Vertices are therefore built exactly,
//! node by node, from basic solutions of the one-step systems
//! `Σ π_c = 1, Σ π_c (S_c − S_n) = 0, π ≥ 0`.

use num::{One, Signed, Zero};

use super::exact::{dot, independent_rows, rank, solve_full_column_rank, to_f64, to_rational, Rational};
use crate::error::{Error, Result};
use crate::scenario::{validate_or_err, MarketScenario, OptionalProcess};

const MARTINGALE_TOL: f64 = 1e-10;
const DEPENDENT_ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct MeasurePolytope {
    vertices: Vec<Vec<f64>>,
    exact_vertices: Vec<Vec<Rational>>,
    densities: Vec<OptionalProcess>,
    expectations: Vec<Vec<f64>>,
    exact_expectations: Vec<Vec<Rational>>,
    has_equivalent: bool,
    /// First node whose one-step polytope has no strictly positive element.
    arbitrage_node: Option<usize>,
}

/// Vertices of the one-step martingale polytope at `node`, as weights over its children.
pub fn one_step_vertices(scenario: &MarketScenario, node: usize) -> Vec<Vec<Rational>> {
    let children = scenario.tree().children(node);
    let k = children.len();
    let mut m: Vec<Vec<Rational>> = vec![vec![Rational::one(); k]];
    for a in 0..scenario.n_assets() {
        let s0 = to_rational(scenario.price(node, a));
        m.push(children.iter().map(|&c| to_rational(scenario.price(c, a)) - &s0).collect());
    }
    let full = m.clone();
    let rows = independent_rows(&m);
    let m: Vec<Vec<Rational>> = rows.iter().map(|&i| m[i].clone()).collect();
    let rhs: Vec<Rational> = (0..m.len()).map(|i| if i == 0 { Rational::one() } else { Rational::zero() }).collect();
    let r = m.len();

    let mut out: Vec<Vec<Rational>> = Vec::new();
    for basis in combinations(k, r) {
        let sub: Vec<Vec<Rational>> = m.iter().map(|row| basis.iter().map(|&j| row[j].clone()).collect()).collect();
        if rank(&sub) < r {
            continue;
        }
        let Some(sol) = solve_full_column_rank(&sub, &rhs) else { continue };
        if sol.iter().any(|v| v.is_negative()) {
            continue;
        }
        let mut pi = vec![Rational::zero(); k];
        for (&j, v) in basis.iter().zip(sol) {
            pi[j] = v;
        }
        // dropped rows hold only up to the rounding of the input prices
        let consistent = full.iter().skip(1).all(|row| {
            let scale = row.iter().map(|x| to_f64(x).abs()).fold(1.0, f64::max);
            to_f64(&dot(row, &pi)).abs() <= DEPENDENT_ROW_TOL * scale
        });
        if !consistent {
            continue;
        }
        if !out.contains(&pi) {
            out.push(pi);
        }
    }
    out.sort();
    out
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < r - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    rec(0, n, r, &mut cur, &mut out);
    out
}

/// max over nodes and assets of |Σ_children Q(child)(S_child − S_node)|.
pub fn martingale_residual(scenario: &MarketScenario, leaf_measure: &[f64]) -> f64 {
    let tree = scenario.tree();
    let marg = tree.node_marginals(leaf_measure);
    let mut worst: f64 = 0.0;
    for n in 0..tree.len() {
        for a in 0..scenario.n_assets() {
            let s: f64 = tree
                .children(n)
                .iter()
                .map(|&c| marg[c] * (scenario.price(c, a) - scenario.price(n, a)))
                .sum();
            worst = worst.max(s.abs());
        }
    }
    worst
}

impl MeasurePolytope {
    /// Vertex set of the martingale polytope; fails unless an equivalent martingale
    /// measure exists.
    pub fn enumerate(scenario: &MarketScenario, cap: usize) -> Result<Self> {
        let p = Self::enumerate_closed(scenario, cap)?;
        if !p.has_equivalent {
            let at = p.arbitrage_node.map_or(String::new(), |n| format!(" (first at node {n})"));
            return Err(Error::Arbitrage(format!(
                "ℳ = ∅: no martingale measure equivalent to ℙ exists, violating the no-arbitrage hypothesis{at}"
            )));
        }
        Ok(p)
    }

    /// Vertex set of the closed polytope, without requiring an equivalent element.
    pub fn enumerate_closed(scenario: &MarketScenario, cap: usize) -> Result<Self> {
        validate_or_err(scenario)?;
        let tree = scenario.tree();
        let n = tree.len();
        let leaves = tree.leaves();
        let mut leaf_pos = vec![usize::MAX; n];
        for (k, &l) in leaves.iter().enumerate() {
            leaf_pos[l] = k;
        }

        let steps: Vec<Vec<Vec<Rational>>> = (0..n).map(|i| one_step_vertices(scenario, i)).collect();
        let mut arbitrage_node = None;
        for i in 0..n {
            if tree.is_leaf(i) {
                continue;
            }
            let k = tree.children(i).len();
            let covered = (0..k).all(|c| steps[i].iter().any(|v| v[c].is_positive()));
            if !covered {
                arbitrage_node = Some(i);
                break;
            }
        }

        // count first so that oversized enumerations fail before allocating
        let mut count = vec![0usize; n];
        for i in (0..n).rev() {
            count[i] = if tree.is_leaf(i) {
                1
            } else {
                steps[i]
                    .iter()
                    .map(|pi| {
                        tree.children(i)
                            .iter()
                            .zip(pi)
                            .filter(|(_, w)| w.is_positive())
                            .fold(1usize, |acc, (&c, _)| acc.saturating_mul(count[c]))
                    })
                    .fold(0usize, |a, b| a.saturating_add(b))
            };
        }
        if count[0] == 0 {
            return Err(Error::Arbitrage(
                "ℳ = ∅: the martingale polytope is empty, violating the no-arbitrage hypothesis".into(),
            ));
        }
        if count[0] > cap {
            return Err(Error::Capacity { what: "martingale vertices", count: count[0], cap });
        }

        // sparse leaf measures per subtree, built bottom-up
        let mut sub: Vec<Vec<Vec<(usize, Rational)>>> = vec![Vec::new(); n];
        for i in (0..n).rev() {
            if tree.is_leaf(i) {
                sub[i] = vec![vec![(leaf_pos[i], Rational::one())]];
                continue;
            }
            let children = tree.children(i);
            let mut acc_all = Vec::new();
            for pi in &steps[i] {
                let mut acc: Vec<Vec<(usize, Rational)>> = vec![Vec::new()];
                for (&c, w) in children.iter().zip(pi) {
                    if !w.is_positive() {
                        continue;
                    }
                    let mut next = Vec::with_capacity(acc.len() * sub[c].len());
                    for partial in &acc {
                        for tail in &sub[c] {
                            let mut v = partial.clone();
                            v.extend(tail.iter().map(|(l, q)| (*l, q * w)));
                            next.push(v);
                        }
                    }
                    acc = next;
                }
                acc_all.extend(acc);
            }
            sub[i] = acc_all;
            for &c in children {
                sub[c].clear();
            }
        }

        let mut exact_vertices: Vec<Vec<Rational>> = sub[0]
            .iter()
            .map(|sparse| {
                let mut v = vec![Rational::zero(); leaves.len()];
                for (l, q) in sparse {
                    v[*l] = q.clone();
                }
                v
            })
            .collect();
        exact_vertices.sort();
        exact_vertices.dedup();

        let has_equivalent = (0..leaves.len()).all(|l| exact_vertices.iter().any(|v| v[l].is_positive()));
        let probs = tree.node_probabilities();
        let payoffs: Vec<Vec<Rational>> =
            scenario.payoffs().iter().map(|row| row.iter().map(|&x| to_rational(x)).collect()).collect();

        let mut vertices = Vec::with_capacity(exact_vertices.len());
        let mut densities = Vec::with_capacity(exact_vertices.len());
        let mut exact_expectations = Vec::with_capacity(exact_vertices.len());
        for v in &exact_vertices {
            vertices.push(v.iter().map(to_f64).collect::<Vec<f64>>());
            let mut marg = vec![Rational::zero(); n];
            for (k, &l) in leaves.iter().enumerate() {
                marg[l] = v[k].clone();
            }
            for i in (1..n).rev() {
                let p = tree.nodes()[i].parent.expect("non-root");
                let add = marg[i].clone();
                marg[p] += add;
            }
            densities.push(OptionalProcess(marg.iter().zip(&probs).map(|(q, p)| to_f64(q) / p).collect()));
            let e: Vec<Rational> = (0..scenario.n_claims())
                .map(|i| v.iter().zip(&payoffs).fold(Rational::zero(), |acc, (q, f)| acc + q * &f[i]))
                .collect();
            exact_expectations.push(e);
        }
        let expectations = exact_expectations.iter().map(|e| e.iter().map(to_f64).collect()).collect();

        let poly = Self {
            vertices,
            exact_vertices,
            densities,
            expectations,
            exact_expectations,
            has_equivalent,
            arbitrage_node: if has_equivalent { None } else { arbitrage_node },
        };
        debug_assert!(poly.vertices.iter().all(|v| martingale_residual(scenario, v) <= MARTINGALE_TOL));
        Ok(poly)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Leaf measures of the vertices, in lexicographic order of the exact weights.
    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn exact_vertices(&self) -> &[Vec<Rational>] {
        &self.exact_vertices
    }

    pub fn has_equivalent(&self) -> bool {
        self.has_equivalent
    }

    /// Density process Z^j(node) = Q_j(node)/ℙ(node).
    pub fn density_process(&self, j: usize) -> Result<&OptionalProcess> {
        self.densities
            .get(j)
            .ok_or_else(|| Error::InvalidInput(format!("vertex index {j} out of range ({} vertices)", self.len())))
    }

    pub fn densities(&self) -> &[OptionalProcess] {
        &self.densities
    }

    /// p_j = E_{Q_j}[F_T] for every vertex.
    pub fn endowment_expectations(&self) -> &[Vec<f64>] {
        &self.expectations
    }

    pub fn exact_endowment_expectations(&self) -> &[Vec<Rational>] {
        &self.exact_expectations
    }

    /// sup over martingale measures of E_Q[h] for a terminal claim given leafwise;
    /// attained at a vertex.
    pub fn superreplication_price(&self, h: &[f64]) -> f64 {
        self.vertices
            .iter()
            .map(|q| q.iter().zip(h).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// E_{Q_j}[∫ c dκ] = Σ_n ℙ(n)Δκ(n) Z^j(n) c(n) for every vertex.
    pub fn budget_usage(&self, clock_weights: &[f64], c: &[f64]) -> Vec<f64> {
        self.densities
            .iter()
            .map(|z| {
                z.values()
                    .iter()
                    .zip(clock_weights)
                    .zip(c)
                    .map(|((z, w), c)| if *w == 0.0 { 0.0 } else { z * w * c })
                    .sum()
            })
            .collect()
    }
}

pub fn enumerate_martingale_vertices(scenario: &MarketScenario, cap: usize) -> Result<MeasurePolytope> {
    MeasurePolytope::enumerate(scenario, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn binomial_vertex() {
        let s = fixtures::bin1();
        let p = MeasurePolytope::enumerate(&s, 100).unwrap();
        assert_eq!(p.exact_vertices(), &[vec![q(1, 3), q(2, 3)]]);
        let z = p.density_process(0).unwrap();
        assert_eq!(z.values()[0], 1.0);
        assert!((z.values()[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((z.values()[2] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn trinomial_vertices_and_digital_expectations() {
        let s = fixtures::tri1();
        let p = MeasurePolytope::enumerate(&s, 100).unwrap();
        assert_eq!(p.exact_vertices(), &[vec![q(0, 1), q(1, 1), q(0, 1)], vec![q(1, 3), q(0, 1), q(2, 3)]]);
        assert_eq!(p.exact_endowment_expectations(), &[vec![q(0, 1)], vec![q(1, 3)]]);
        let z = p.density_process(0).unwrap();
        assert_eq!(&z.values()[1..], &[0.0, 3.0, 0.0]);
        assert!((p.superreplication_price(&[1.0, 0.0, 0.0]) - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.superreplication_price(&[1.0, 1.0, 1.0]) - 1.0).abs() < 1e-15);
        assert!((p.superreplication_price(&[2.0, 1.0, 0.5]) - 1.0).abs() < 1e-15);
        assert!(p.density_process(2).is_err());
    }

    #[test]
    fn no_stock_gives_leaf_indicators() {
        let s = fixtures::no_stock(3);
        let p = MeasurePolytope::enumerate(&s, 100).unwrap();
        assert_eq!(p.len(), 3);
        for (j, v) in p.exact_vertices().iter().enumerate() {
            for (l, x) in v.iter().enumerate() {
                assert_eq!(*x, if l == 2 - j { q(1, 1) } else { q(0, 1) });
            }
        }
    }

    #[test]
    fn deterministic_density_is_one() {
        let s = fixtures::det1();
        let p = MeasurePolytope::enumerate(&s, 100).unwrap();
        assert_eq!(p.len(), 1);
        assert!(p.density_process(0).unwrap().values().iter().all(|&z| z == 1.0));
    }

    #[test]
    fn replicable_claim_has_single_expectation() {
        let s = fixtures::tri1_with_payoffs(&[2.0, 1.0, 0.5]);
        let p = MeasurePolytope::enumerate(&s, 100).unwrap();
        for e in p.exact_endowment_expectations() {
            assert_eq!(e, &vec![q(1, 1)]);
        }
    }

    #[test]
    fn arbitrage_is_rejected() {
        let s = fixtures::arbitrage_market();
        assert!(matches!(MeasurePolytope::enumerate(&s, 100), Err(Error::Arbitrage(_))));
    }

    #[test]
    fn uniform_price_jump_is_arbitrage() {
        let mut f = fixtures::bin1_file();
        for c in f.tree.children.iter_mut() {
            c.prices = vec![3.0];
        }
        let s = f.to_scenario().unwrap();
        assert!(one_step_vertices(&s, 0).is_empty());
        assert!(matches!(MeasurePolytope::enumerate(&s, 100), Err(Error::Arbitrage(_))));
    }

    #[test]
    fn vertex_cap_is_enforced() {
        let s = fixtures::no_stock(5);
        assert!(matches!(MeasurePolytope::enumerate(&s, 4), Err(Error::Capacity { count: 5, cap: 4, .. })));
    }
}
