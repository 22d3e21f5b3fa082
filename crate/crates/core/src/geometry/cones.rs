//! The primal cone cl 𝒦 = {(x,q): x + q·p ≥ 0 for p ∈ 𝒫̂}, 𝒫̂ = conv{p_j}, its polar
//! cl ℒ = cone{(1,p): p ∈ 𝒫̂}, and their relative interiors.
//!
//! Extreme rays of cl 𝒦 come from an exact double-description pass over the rows
//! (1, p_j). The lineality space of cl 𝒦 is nontrivial exactly when 𝒫̂ is not
//! full-dimensional, i.e. when ℒ is not open.

use num::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::exact::{dot, independent_rows, inverse, nullspace, normalize_max, rank, to_f64, Rational};
use super::polytope::MeasurePolytope;
use crate::error::{Error, Result};

const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeKind {
    /// Open primal cone 𝒦.
    K,
    ClK,
    /// Relative interior ℒ of the dual cone.
    L,
    ClL,
}

#[derive(Debug, Clone)]
pub struct ConePair {
    dim: usize,
    p_set: Vec<Vec<f64>>,
    p_sources: Vec<usize>,
    k_rays: Vec<Vec<f64>>,
    k_lineality: Vec<Vec<f64>>,
    exact_k_rays: Vec<Vec<Rational>>,
    exact_k_lineality: Vec<Vec<Rational>>,
    exact_p_set: Vec<Vec<Rational>>,
}

struct Ray {
    v: Vec<Rational>,
    zeros: Vec<usize>,
}

/// Extreme rays and a lineality basis of {z : a·z ≥ 0 for every row a}.
pub fn cone_generators(rows: &[Vec<Rational>], dim: usize, cap: usize) -> Result<(Vec<Vec<Rational>>, Vec<Vec<Rational>>)> {
    let lineality = nullspace(rows, dim);
    let basis = independent_rows(rows);
    let r = basis.len();
    if r == 0 {
        return Ok((Vec::new(), lineality));
    }
    let ab: Vec<Vec<Rational>> = basis.iter().map(|&i| rows[i].clone()).collect();
    let gram: Vec<Vec<Rational>> = ab.iter().map(|a| ab.iter().map(|b| dot(a, b)).collect()).collect();
    let ginv = inverse(&gram).expect("rows are independent");
    let mut rays: Vec<Ray> = (0..r)
        .map(|i| {
            let mut v: Vec<Rational> =
                (0..dim).map(|c| (0..r).fold(Rational::zero(), |acc, k| acc + &ab[k][c] * &ginv[k][i])).collect();
            normalize_max(&mut v);
            let zeros = basis.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, &b)| b).collect();
            Ray { v, zeros }
        })
        .collect();

    for idx in (0..rows.len()).filter(|i| !basis.contains(i)) {
        let a = &rows[idx];
        let vals: Vec<Rational> = rays.iter().map(|ray| dot(a, &ray.v)).collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&i| vals[i].is_positive()).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&i| vals[i].is_negative()).collect();
        if neg.is_empty() {
            for (ray, val) in rays.iter_mut().zip(&vals) {
                if val.is_zero() {
                    ray.zeros.push(idx);
                }
            }
            continue;
        }
        let mut next: Vec<Ray> = Vec::new();
        for &p in &pos {
            for &n in &neg {
                let common: Vec<usize> = rays[p].zeros.iter().filter(|z| rays[n].zeros.contains(z)).copied().collect();
                if common.len() + 2 < r {
                    continue;
                }
                let adjacent = (0..rays.len())
                    .filter(|&o| o != p && o != n)
                    .all(|o| !common.iter().all(|z| rays[o].zeros.contains(z)));
                if !adjacent {
                    continue;
                }
                let mut v: Vec<Rational> = rays[n]
                    .v
                    .iter()
                    .zip(&rays[p].v)
                    .map(|(vn, vp)| &vals[p] * vn - &vals[n] * vp)
                    .collect();
                normalize_max(&mut v);
                let mut zeros = common;
                zeros.push(idx);
                next.push(Ray { v, zeros });
            }
        }
        for (i, mut ray) in rays.into_iter().enumerate() {
            if vals[i].is_negative() {
                continue;
            }
            if vals[i].is_zero() {
                ray.zeros.push(idx);
            }
            next.push(ray);
        }
        if next.len() > cap {
            return Err(Error::Capacity { what: "cone rays", count: next.len(), cap });
        }
        rays = next;
    }
    let mut out: Vec<Vec<Rational>> = rays.into_iter().map(|r| r.v).collect();
    out.sort();
    out.dedup();
    Ok((out, lineality))
}

impl ConePair {
    pub fn build(polytope: &MeasurePolytope, cap: usize) -> Result<Self> {
        if !polytope.has_equivalent() {
            return Err(Error::Arbitrage("cones require an equivalent martingale measure (ℳ ≠ ∅)".into()));
        }
        let exp = polytope.exact_endowment_expectations();
        let n_claims = exp.first().map_or(0, |p| p.len());
        let dim = n_claims + 1;
        let mut unique: Vec<(Vec<Rational>, usize)> = Vec::new();
        for (j, p) in exp.iter().enumerate() {
            if !unique.iter().any(|(u, _)| u == p) {
                unique.push((p.clone(), j));
            }
        }
        unique.sort();
        let lift = |p: &[Rational]| {
            let mut row = vec![Rational::from_integer(1.into())];
            row.extend(p.iter().cloned());
            row
        };
        let rows: Vec<Vec<Rational>> = unique.iter().map(|(p, _)| lift(p)).collect();
        let (rays, lineality) = cone_generators(&rows, dim, cap)?;

        let mut p_set = Vec::new();
        let mut p_sources = Vec::new();
        let mut exact_p_set = Vec::new();
        for ((p, src), row) in unique.iter().zip(&rows) {
            let mut tight: Vec<Vec<Rational>> = rays.iter().filter(|g| dot(g, row).is_zero()).cloned().collect();
            tight.extend(lineality.iter().cloned());
            if rank(&tight) + 1 == dim {
                p_set.push(p.iter().map(to_f64).collect());
                exact_p_set.push(p.clone());
                p_sources.push(*src);
            }
        }
        let to_f = |v: &Vec<Vec<Rational>>| v.iter().map(|r| r.iter().map(to_f64).collect()).collect();
        Ok(Self {
            dim,
            k_rays: to_f(&rays),
            k_lineality: to_f(&lineality),
            exact_k_rays: rays,
            exact_k_lineality: lineality,
            p_set,
            p_sources,
            exact_p_set,
        })
    }

    /// N + 1.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Vertices of 𝒫̂.
    pub fn p_set(&self) -> &[Vec<f64>] {
        &self.p_set
    }

    pub fn exact_p_set(&self) -> &[Vec<Rational>] {
        &self.exact_p_set
    }

    /// For each vertex of 𝒫̂, the index of a martingale vertex with that expectation.
    pub fn p_sources(&self) -> &[usize] {
        &self.p_sources
    }

    /// Rows (1, p) of the half-space description x + q·p ≥ 0 of cl 𝒦.
    pub fn k_halfspaces(&self) -> Vec<Vec<f64>> {
        self.p_set.iter().map(|p| lift_f(p)).collect()
    }

    pub fn k_rays(&self) -> &[Vec<f64>] {
        &self.k_rays
    }

    pub fn k_lineality(&self) -> &[Vec<f64>] {
        &self.k_lineality
    }

    pub fn exact_k_rays(&self) -> &[Vec<Rational>] {
        &self.exact_k_rays
    }

    pub fn exact_k_lineality(&self) -> &[Vec<Rational>] {
        &self.exact_k_lineality
    }

    /// Generators (1, p) of cl ℒ.
    pub fn l_rays(&self) -> Vec<Vec<f64>> {
        self.k_halfspaces()
    }

    /// Inequalities g·(y,r) ≥ 0 of cl ℒ; these are the extreme rays of cl 𝒦.
    pub fn l_halfspaces(&self) -> &[Vec<f64>] {
        &self.k_rays
    }

    /// Equalities ℓ·(y,r) = 0 of cl ℒ (the lineality space of cl 𝒦).
    pub fn l_equalities(&self) -> &[Vec<f64>] {
        &self.k_lineality
    }

    pub fn l_open(&self) -> bool {
        self.k_lineality.is_empty()
    }

    pub fn in_cone(&self, point: &[f64], which: ConeKind) -> Result<bool> {
        if point.len() != self.dim {
            return Err(Error::InvalidInput(format!("point has dimension {}, cones live in {}", point.len(), self.dim)));
        }
        let d = |a: &[f64]| a.iter().zip(point).map(|(x, y)| x * y).sum::<f64>();
        Ok(match which {
            ConeKind::K => self.p_set.iter().all(|p| d(&lift_f(p)) > MEMBERSHIP_TOL),
            ConeKind::ClK => self.p_set.iter().all(|p| d(&lift_f(p)) >= -MEMBERSHIP_TOL),
            ConeKind::L => {
                self.k_lineality.iter().all(|l| d(l).abs() <= MEMBERSHIP_TOL)
                    && self.k_rays.iter().all(|g| d(g) > MEMBERSHIP_TOL)
            }
            ConeKind::ClL => {
                self.k_lineality.iter().all(|l| d(l).abs() <= MEMBERSHIP_TOL)
                    && self.k_rays.iter().all(|g| d(g) >= -MEMBERSHIP_TOL)
            }
        })
    }

    /// min_j (x + q·p_j) over the vertices of 𝒫̂; nonnegative iff (x,q) ∈ cl 𝒦.
    pub fn k_margin(&self, x: f64, q: &[f64]) -> f64 {
        self.p_set
            .iter()
            .map(|p| x + p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest violation of the polarity relations between the generator sets:
    /// negative parts of g·(1,p) and absolute values of ℓ·(1,p).
    pub fn polarity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for lr in self.l_rays() {
            let d = |a: &[f64]| a.iter().zip(&lr).map(|(x, y)| x * y).sum::<f64>();
            for g in &self.k_rays {
                worst = worst.max(-d(g));
            }
            for l in &self.k_lineality {
                worst = worst.max(d(l).abs());
            }
        }
        worst
    }

    /// Exact version of [`ConePair::polarity_residual`]; zero iff the relations hold exactly.
    pub fn exact_polarity_holds(&self) -> bool {
        self.exact_p_set.iter().all(|p| {
            let mut row = vec![Rational::from_integer(1.into())];
            row.extend(p.iter().cloned());
            self.exact_k_rays.iter().all(|g| !dot(g, &row).is_negative())
                && self.exact_k_lineality.iter().all(|l| dot(l, &row).is_zero())
        })
    }
}

fn lift_f(p: &[f64]) -> Vec<f64> {
    let mut row = Vec::with_capacity(p.len() + 1);
    row.push(1.0);
    row.extend_from_slice(p);
    row
}

pub fn build_cones(polytope: &MeasurePolytope, cap: usize) -> Result<ConePair> {
    ConePair::build(polytope, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn cones_of(s: &crate::scenario::MarketScenario) -> ConePair {
        let p = MeasurePolytope::enumerate(s, 1000).unwrap();
        ConePair::build(&p, 1000).unwrap()
    }

    #[test]
    fn no_claims_gives_half_lines() {
        let c = cones_of(&fixtures::bin1());
        assert_eq!(c.dim(), 1);
        assert_eq!(c.k_rays(), &[vec![1.0]]);
        assert!(c.l_open());
        assert!(c.in_cone(&[0.5], ConeKind::K).unwrap());
        assert!(!c.in_cone(&[0.0], ConeKind::K).unwrap());
        assert!(c.in_cone(&[0.0], ConeKind::ClK).unwrap());
        assert!(c.in_cone(&[2.0], ConeKind::L).unwrap());
        assert!(!c.in_cone(&[-2.0], ConeKind::ClL).unwrap());
    }

    #[test]
    fn trinomial_digital_halfspaces() {
        let c = cones_of(&fixtures::tri1());
        assert_eq!(c.p_set(), &[vec![0.0], vec![1.0 / 3.0]]);
        assert_eq!(c.k_halfspaces(), vec![vec![1.0, 0.0], vec![1.0, 1.0 / 3.0]]);
        // rays of {x ≥ 0, x + q/3 ≥ 0}
        assert_eq!(c.k_rays(), &[vec![0.0, 1.0], vec![1.0 / 3.0, -1.0]]);
        assert!(c.l_open());
        assert!(c.in_cone(&[1.0, -3.0], ConeKind::ClK).unwrap());
        assert!(!c.in_cone(&[1.0, -3.0], ConeKind::K).unwrap());
        assert!(c.in_cone(&[0.0, 0.0], ConeKind::ClK).unwrap());
        assert!(!c.in_cone(&[0.0, 0.0], ConeKind::K).unwrap());
        assert!(c.in_cone(&[1.0, 0.0], ConeKind::K).unwrap());
        assert!(c.in_cone(&[1.0, 0.2], ConeKind::L).unwrap());
        assert!(c.in_cone(&[1.0, 0.0], ConeKind::ClL).unwrap());
        assert!(!c.in_cone(&[1.0, 0.0], ConeKind::L).unwrap());
        assert!(c.in_cone(&[1.0, 0.5], ConeKind::ClL).is_ok_and(|b| !b));
        assert!(c.exact_polarity_holds());
        assert_eq!(c.polarity_residual(), 0.0);
    }

    #[test]
    fn replicable_claim_collapses_dual_cone() {
        let c = cones_of(&fixtures::tri1_with_payoffs(&[2.0, 1.0, 0.5]));
        assert_eq!(c.p_set(), &[vec![1.0]]);
        assert!(!c.l_open());
        assert_eq!(c.k_lineality().len(), 1);
        assert!(c.in_cone(&[2.0, 2.0], ConeKind::L).unwrap());
        assert!(!c.in_cone(&[2.0, 1.0], ConeKind::ClL).unwrap());
        assert!(c.exact_polarity_holds());
    }

    #[test]
    fn double_description_square_cone() {
        // x ± q1 ± q2 ≥ 0 : the cone over a square has four extreme rays
        let q = |n: i64| Rational::from_integer(n.into());
        let rows = vec![
            vec![q(1), q(1), q(1)],
            vec![q(1), q(1), q(-1)],
            vec![q(1), q(-1), q(1)],
            vec![q(1), q(-1), q(-1)],
        ];
        let (rays, lin) = cone_generators(&rows, 3, 100).unwrap();
        assert!(lin.is_empty());
        assert_eq!(rays.len(), 4);
        for r in &rays {
            let tight = rows.iter().filter(|a| dot(a, r).is_zero()).count();
            assert_eq!(tight, 2);
            assert!(rows.iter().all(|a| !dot(a, r).is_negative()));
        }
    }
}
