use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::membership::{consumption_dual_gap, deflator_capacity, deflator_primal_gap};
use super::{probes, CheckRecord, Tally};
use crate::dual::{is_in_y_yr, y_yr_violation};
use crate::finiteness::{check_finiteness, FinitenessProbes};
use crate::geometry::{martingale_residual, ConeKind};
use crate::instance::Instance;
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::primal::{is_feasible_consumption, SolveStatus};
use crate::scenario::OptionalProcess;
use crate::Result;

const WEAK_DUALITY_TOL: f64 = 1e-7;
const BICONJUGACY_TOL: f64 = 1e-5;
const MARGINAL_TOL: f64 = 1e-7;
const BUDGET_TOL: f64 = 1e-8;
const SUBGRADIENT_TOL: f64 = 1e-7;
const SEMICONTINUITY_TOL: f64 = 1e-6;
const POLARITY_TOL: f64 = 1e-10;
const MEMBERSHIP_TOL: f64 = 1e-9;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn split(z: &[f64]) -> (f64, &[f64]) {
    (z[0], &z[1..])
}

fn point(a: f64, b: &[f64]) -> Vec<f64> {
    std::iter::once(a).chain(b.iter().copied()).collect()
}

/// u(x,q) ≤ v(y,r) + xy + q·r over a product grid. Half of the dual probes are the
/// subgradients of primal probes, where the inequality is tight.
pub fn verify_weak_duality(inst: &Instance, grid: usize, seed: u64) -> CheckRecord {
    let mut tally = Tally::new("weak_duality", "u(x,q) ≤ v(y,r) + xy + q·r on cl 𝒦 × cl ℒ", WEAK_DUALITY_TOL);
    let nb = 2.min(grid / 4);
    let mut kp = probes::interior_k(&inst.cones, grid - nb, seed);
    kp.extend(probes::boundary_k(&inst.cones, nb, seed ^ 1));
    let us: Vec<Result<crate::primal::PrimalSolution>> = kp.par_iter().map(|z| inst.primal(z[0], &z[1..])).collect();
    let mut lp: Vec<Vec<f64>> =
        us.iter().flatten().filter(|s| s.status == SolveStatus::Optimal).take(grid / 2).map(|s| point(s.y, &s.r)).collect();
    let nl = grid.saturating_sub(lp.len() + nb);
    lp.extend(probes::interior_l(&inst.cones, nl, seed ^ 2));
    lp.extend(probes::boundary_l(&inst.cones, grid - lp.len(), seed ^ 3));
    let vs: Vec<Result<f64>> = lp.par_iter().map(|z| inst.v(z[0], &z[1..])).collect();
    for (zk, u) in kp.iter().zip(&us) {
        for (zl, v) in lp.iter().zip(&vs) {
            match (u, v) {
                (Ok(u), Ok(v)) => {
                    let u = u.value;
                    let res = if u == f64::NEG_INFINITY || *v == f64::INFINITY { 0.0 } else { u - v - dot(zk, zl) };
                    tally.residual(res, || format!("(x,q)={zk:?} (y,r)={zl:?}: u={u}, v={v}"));
                }
                (Err(e), _) => tally.error(format!("u{zk:?}: {e}")),
                (_, Err(e)) => tally.error(format!("v{zl:?}: {e}")),
            }
        }
    }
    tally.finish()
}

/// Orthogonal projector onto the complement of span(rows).
struct Projector {
    basis: Vec<Vec<f64>>,
}

impl Projector {
    fn new(rows: &[Vec<f64>]) -> Self {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for r in rows {
            let mut v = r.clone();
            for b in &basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            let n = dot(&v, &v).sqrt();
            if n > 1e-12 {
                basis.push(v.into_iter().map(|x| x / n).collect());
            }
        }
        Self { basis }
    }

    fn apply(&self, v: &mut [f64]) {
        for b in &self.basis {
            let c = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
}

/// Minimizes a convex function from a warm start: a coordinate mesh, then gradient
/// steps with backtracking. `eval` returns (value, gradient) or None outside the domain.
fn descend(start: Vec<f64>, proj: &Projector, eval: impl Fn(&[f64]) -> Option<(f64, Vec<f64>)>) -> Option<f64> {
    let (mut best_v, mut best_g) = eval(&start)?;
    let mut best = start;
    let h = 0.02 * best.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
    for i in 0..best.len() {
        for s in [-1.0, 1.0] {
            let mut d = vec![0.0; best.len()];
            d[i] = s * h;
            proj.apply(&mut d);
            let z: Vec<f64> = best.iter().zip(&d).map(|(a, b)| a + b).collect();
            if let Some((v, g)) = eval(&z) {
                if v < best_v {
                    best_v = v;
                    best_g = g;
                    best = z;
                }
            }
        }
    }
    let mut step = 1.0;
    for _ in 0..40 {
        let mut d: Vec<f64> = best_g.iter().map(|g| -g).collect();
        proj.apply(&mut d);
        let dd = dot(&d, &d);
        if dd.sqrt() <= 1e-13 * best_v.abs().max(1.0) {
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let z: Vec<f64> = best.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            if let Some((v, g)) = eval(&z) {
                if v <= best_v - 1e-4 * step * dd {
                    best_v = v;
                    best_g = g;
                    best = z;
                    improved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
        step *= 2.0;
    }
    Some(best_v)
}

fn biconjugacy_points(inst: &Instance, grid: usize, seed: u64, dual: bool) -> Vec<Vec<f64>> {
    let count = if inst.cones.dim() == 1 { grid } else { grid * grid };
    if dual {
        probes::interior_l(&inst.cones, count, seed)
    } else {
        probes::interior_k(&inst.cones, count, seed)
    }
}

/// u = inf_{(y,r)} (v + xy + q·r) and v = sup_{(x,q)} (u − xy − q·r) on interior grids.
pub fn verify_biconjugacy(inst: &Instance, grid: usize, seed: u64) -> Vec<CheckRecord> {
    let no_lineality = Projector::new(&[]);
    let l_proj = Projector::new(inst.cones.l_equalities());

    let kp = biconjugacy_points(inst, grid, seed, false);
    let u_side: Vec<std::result::Result<f64, String>> = kp
        .par_iter()
        .map(|z| {
            let (x, q) = split(z);
            let sol = inst.primal(x, q).map_err(|e| e.to_string())?;
            let eval = |yr: &[f64]| {
                let d = inst.dual(yr[0], &yr[1..]).ok()?;
                if !d.value.is_finite() {
                    return None;
                }
                let grad: Vec<f64> = z.iter().zip(point(d.support_x, &d.support_q)).map(|(a, b)| a - b).collect();
                Some((d.value + dot(z, yr), grad))
            };
            let inner = descend(point(sol.y, &sol.r), &l_proj, eval).ok_or("inner search found no finite dual value")?;
            Ok((sol.value - inner).abs() / sol.value.abs().max(1.0))
        })
        .collect();
    let mut tu = Tally::new("biconjugacy.u", "u(x,q) = inf_{(y,r)∈ℒ} [v(y,r) + xy + q·r]", BICONJUGACY_TOL);
    for (z, r) in kp.iter().zip(u_side) {
        match r {
            Ok(gap) => tu.residual(gap, || format!("(x,q)={z:?}: gap {gap:.3e}")),
            Err(e) => tu.error(format!("(x,q)={z:?}: {e}")),
        }
    }

    let lp = biconjugacy_points(inst, grid, seed ^ 7, true);
    let v_side: Vec<std::result::Result<f64, String>> = lp
        .par_iter()
        .map(|z| {
            let (y, r) = split(z);
            let sol = inst.dual(y, r).map_err(|e| e.to_string())?;
            let eval = |xq: &[f64]| {
                let p = inst.primal(xq[0], &xq[1..]).ok()?;
                if !p.value.is_finite() || p.status != SolveStatus::Optimal {
                    return None;
                }
                let grad: Vec<f64> = point(p.y, &p.r).iter().zip(z).map(|(a, b)| b - a).collect();
                Some((-(p.value - dot(z, xq)), grad))
            };
            let inner = -descend(point(sol.support_x, &sol.support_q), &no_lineality, eval)
                .ok_or("inner search found no finite primal value")?;
            Ok((sol.value - inner).abs() / sol.value.abs().max(1.0))
        })
        .collect();
    let mut tv = Tally::new("biconjugacy.v", "v(y,r) = sup_{(x,q)∈𝒦} [u(x,q) − xy − q·r]", BICONJUGACY_TOL);
    for (z, r) in lp.iter().zip(v_side) {
        match r {
            Ok(gap) => tv.residual(gap, || format!("(y,r)={z:?}: gap {gap:.3e}")),
            Err(e) => tv.error(format!("(y,r)={z:?}: {e}")),
        }
    }
    vec![tu.finish(), tv.finish()]
}

#[derive(Default)]
struct FocResiduals {
    marginal: f64,
    budget: f64,
    dual_finite: f64,
    subgradient: f64,
    conjugate: f64,
    star: usize,
}

fn foc_at(inst: &Instance, z: &[f64]) -> std::result::Result<Option<FocResiduals>, String> {
    let (x, q) = split(z);
    let ps = inst.primal(x, q).map_err(|e| e.to_string())?;
    if ps.status != SolveStatus::Optimal {
        return Ok(None);
    }
    let ds = inst.dual(ps.y, &ps.r).map_err(|e| format!("dual at the subgradient: {e}"))?;
    let w = inst.scenario.clock_weights();
    let mut out = FocResiduals::default();
    let mut paired = 0.0;
    for n in inst.scenario.clock_support() {
        let mu = inst.field.marginal(n, ps.consumption.0[n]);
        out.marginal = out.marginal.max((ds.deflator.0[n] - mu).abs() / mu);
        paired += w[n] * ds.deflator.0[n] * ps.consumption.0[n];
    }
    let yr = point(ps.y, &ps.r);
    let pairing = dot(z, &yr);
    out.budget = (paired - pairing).abs() / pairing.abs().max(1.0);
    out.dual_finite = if ds.value.is_finite() { 0.0 } else { f64::INFINITY };
    out.conjugate = (ps.value - ds.value - pairing).abs() / ps.value.abs().max(1.0);

    let margin = inst.cones.k_margin(x, q);
    let hull = inst.cones.p_set();
    for scale in [0.5, 0.05] {
        for i in 0..z.len() {
            let reach = if i == 0 { 1.0 } else { hull.iter().fold(1.0f64, |m, p| m.max(p[i - 1].abs())) };
            for s in [-1.0, 1.0] {
                let mut zp = z.to_vec();
                zp[i] += s * scale * margin / reach;
                let up = inst.u(zp[0], &zp[1..]).map_err(|e| format!("star point {zp:?}: {e}"))?;
                let bound = ps.value + dot(&yr, &zp) - pairing;
                out.subgradient = out.subgradient.max(up - bound);
                out.star += 1;
            }
        }
    }
    Ok(Some(out))
}

/// First-order conditions at interior points: Ŷ = U′(ĉ), budget equality, finite
/// dual value, the subgradient inequality on a probe star, and the conjugate pairing.
pub fn verify_foc(inst: &Instance, points: &[Vec<f64>]) -> Vec<CheckRecord> {
    let results: Vec<_> = points.par_iter().map(|z| foc_at(inst, z)).collect();
    let mut t = [
        Tally::new("foc.marginal", "Ŷ = U′(ĉ) on the clock support", MARGINAL_TOL),
        Tally::new("foc.budget", "E[∫Ŷĉ dκ] = xy + q·r", BUDGET_TOL),
        Tally::new("foc.dual_finite", "|v(y,r)| < ∞ at the subgradient", 0.0),
        Tally::new("foc.subgradient", "u(x′,q′) ≤ u(x,q) + y(x′−x) + r·(q′−q)", SUBGRADIENT_TOL),
        Tally::new("foc.conjugate_pair", "u(x,q) − v(y,r) = xy + q·r", WEAK_DUALITY_TOL),
    ];
    for (z, r) in points.iter().zip(results) {
        match r {
            Ok(Some(f)) => {
                t[0].residual(f.marginal, || format!("(x,q)={z:?}"));
                t[1].residual(f.budget, || format!("(x,q)={z:?}"));
                t[2].residual(f.dual_finite, || format!("(x,q)={z:?}"));
                t[3].residual(f.subgradient, || format!("(x,q)={z:?} over {} star points", f.star));
                t[4].residual(f.conjugate, || format!("(x,q)={z:?}"));
            }
            Ok(None) => t.iter_mut().for_each(|t| t.skip("primal status not optimal".into())),
            Err(e) => t.iter_mut().for_each(|t| t.error(format!("(x,q)={z:?}: {e}"))),
        }
    }
    t.into_iter().map(Tally::finish).collect()
}

/// Limit of a sequence sampled at geometrically shrinking steps: Wynn's ε-algorithm
/// (exact for sums of two geometric components), or ±∞ when the increments do not
/// contract.
pub fn tail_limit(s: &[f64]) -> f64 {
    let last = *s.last().expect("nonempty sequence");
    if !last.is_finite() || s.len() < 4 {
        return last;
    }
    let d: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
    let n = d.len();
    let (a, b, c) = (d[n - 3], d[n - 2], d[n - 1]);
    let same = a.signum() == b.signum() && b.signum() == c.signum();
    if same && c.abs() > 1e-9 * last.abs().max(1.0) && b.abs() >= 0.9 * a.abs() && c.abs() >= 0.9 * b.abs() {
        return c.signum() * f64::INFINITY;
    }
    if c.abs() <= 1e-15 * last.abs().max(1.0) {
        return last;
    }
    wynn(s).unwrap_or_else(|| last - c * c / (c - b))
}

/// Highest even column of the ε-table that uses the latest terms.
fn wynn(s: &[f64]) -> Option<f64> {
    let tiny = 1e-14 * s.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut prev: Vec<f64> = vec![0.0; s.len() + 1];
    let mut cur: Vec<f64> = s.to_vec();
    let mut best = None;
    let mut k = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for j in 0..cur.len() - 1 {
            let diff = cur[j + 1] - cur[j];
            if diff == 0.0 || (k % 2 == 0 && diff.abs() <= tiny) {
                return best.or(Some(cur[cur.len() - 1]));
            }
            next.push(prev[j + 1] + 1.0 / diff);
        }
        k += 1;
        prev = cur;
        cur = next;
        if k % 2 == 0 {
            let v = *cur.last().expect("nonempty column");
            if !v.is_finite() {
                return best;
            }
            best = Some(v);
        }
    }
    best
}

/// Directional limits of u and v at boundary points of cl 𝒦 and cl ℒ.
pub fn verify_semicontinuity(inst: &Instance, boundary: usize, directions: usize, steps: usize, seed: u64) -> Vec<CheckRecord> {
    let mut tu = Tally::new("semicontinuity.u", "limsup u(z_m) ≤ u(z) as z_m → z ∈ ∂𝒦", SEMICONTINUITY_TOL);
    let mut tv = Tally::new("semicontinuity.v", "liminf v(z_m) ≥ v(z) as z_m → z ∈ ∂ℒ", SEMICONTINUITY_TOL);
    let eps: Vec<f64> = (0..steps).map(|m| 10f64.powi(-(m as i32 + 2))).collect();
    let kb = probes::boundary_k(&inst.cones, boundary, seed);
    let kd = probes::k_directions(&inst.cones, directions, seed ^ 11);
    let lb = probes::boundary_l(&inst.cones, boundary, seed ^ 13);
    let ld = probes::l_directions(&inst.cones, directions, seed ^ 17);

    let run = |base: &[Vec<f64>], dirs: &[Vec<f64>], f: &(dyn Fn(&[f64]) -> Result<f64> + Sync)| {
        let jobs: Vec<(usize, usize)> = (0..base.len()).flat_map(|b| (0..dirs.len()).map(move |d| (b, d))).collect();
        jobs.par_iter()
            .map(|&(b, d)| {
                let z0 = &base[b];
                let at = f(z0).map_err(|e| format!("{z0:?}: {e}"))?;
                let seq: Vec<f64> = eps
                    .iter()
                    .map(|e| {
                        let z: Vec<f64> = z0.iter().zip(&dirs[d]).map(|(a, v)| a + e * v).collect();
                        f(&z).map_err(|er| format!("{z:?}: {er}"))
                    })
                    .collect::<std::result::Result<_, _>>()?;
                Ok((z0.clone(), at, tail_limit(&seq)))
            })
            .collect::<Vec<std::result::Result<(Vec<f64>, f64, f64), String>>>()
    };
    let u = |z: &[f64]| inst.u(z[0], &z[1..]);
    let v = |z: &[f64]| inst.v(z[0], &z[1..]);
    for r in run(&kb, &kd, &u) {
        match r {
            Ok((z, at, lim)) => {
                let res = if lim == f64::NEG_INFINITY || at == f64::INFINITY {
                    0.0
                } else if at == f64::NEG_INFINITY {
                    f64::INFINITY
                } else {
                    (lim - at).max(0.0)
                };
                tu.residual(res, || format!("z={z:?}: u(z)={at}, limit {lim}"));
            }
            Err(e) => tu.error(e),
        }
    }
    for r in run(&lb, &ld, &v) {
        match r {
            Ok((z, at, lim)) => {
                let res = if lim == f64::INFINITY || at == f64::NEG_INFINITY {
                    0.0
                } else if at == f64::INFINITY {
                    f64::INFINITY
                } else {
                    (at - lim).max(0.0)
                };
                tv.residual(res, || format!("z={z:?}: v(z)={at}, limit {lim}"));
            }
            Err(e) => tv.error(e),
        }
    }
    vec![tu.finish(), tv.finish()]
}

/// Largest s with a leaf measure Q ≥ s satisfying every one-step martingale constraint.
pub fn strict_feasibility_margin(inst: &Instance) -> f64 {
    let s = &inst.scenario;
    let tree = s.tree();
    let leaves = tree.leaves();
    let nl = leaves.len();
    // Leaf indicator rows of every node.
    let mut below = vec![vec![0.0; nl]; tree.len()];
    for (k, &l) in leaves.iter().enumerate() {
        for n in tree.path_to(l) {
            below[n][k] = 1.0;
        }
    }
    let mut obj = vec![0.0; nl + 1];
    obj[nl] = 1.0;
    let mut lp = LinearProgram::new(nl + 1).maximize(obj);
    let mut row = vec![1.0; nl + 1];
    row[nl] = nl as f64;
    lp.constraint(row, Relation::Eq, 1.0);
    for n in 0..tree.len() {
        for a in 0..s.n_assets() {
            let mut row = vec![0.0; nl + 1];
            for &c in tree.children(n) {
                let ds = s.price(c, a) - s.price(n, a);
                for k in 0..nl {
                    row[k] += ds * below[c][k];
                }
            }
            row[nl] = row[..nl].iter().sum();
            if row.iter().any(|v| *v != 0.0) {
                lp.constraint(row, Relation::Eq, 0.0);
            }
        }
    }
    match lp.solve() {
        LpOutcome::Optimal { value, .. } => value,
        _ => f64::NEG_INFINITY,
    }
}

/// No-arbitrage, cone polarity, and cl 𝒦 membership against superreplication prices.
pub fn verify_geometry(inst: &Instance, trials: usize, seed: u64) -> Vec<CheckRecord> {
    let poly = &inst.polytope;
    let mut na = Tally::new("geometry.no_arbitrage", "ℳ ≠ ∅: an equivalent martingale measure exists", 1e-10);
    let margin = strict_feasibility_margin(inst);
    na.residual(if poly.has_equivalent() == (margin > 1e-12) { 0.0 } else { f64::INFINITY }, || {
        format!("vertex-support test says {}, strict LP margin {margin:.3e}", poly.has_equivalent())
    });
    for (j, q) in poly.vertices().iter().enumerate() {
        let r = martingale_residual(&inst.scenario, q);
        na.residual(r, || format!("vertex {j}: martingale residual {r:.3e}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..20 {
        let wts: Vec<f64> = (0..poly.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let sum: f64 = wts.iter().sum();
        let mut mix = vec![0.0; inst.scenario.tree().leaves().len()];
        for (w, q) in wts.iter().zip(poly.vertices()) {
            mix.iter_mut().zip(q).for_each(|(m, v)| *m += w / sum * v);
        }
        let r = martingale_residual(&inst.scenario, &mix);
        na.residual(r, || format!("random mixture: martingale residual {r:.3e}"));
    }

    let mut pol = Tally::new("geometry.polarity", "(x,q)·(y,r) ≥ 0 on generators of cl 𝒦 × cl ℒ", POLARITY_TOL);
    let res = inst.cones.polarity_residual();
    pol.residual(res, || format!("floating residual {res:.3e}"));
    pol.residual(if inst.cones.exact_polarity_holds() { 0.0 } else { f64::INFINITY }, || "exact check".into());

    let mut sr = Tally::new("geometry.superreplication", "(x,q) ∈ cl 𝒦 ⟺ sup_Q E_Q[−q·F_T] ≤ x", 0.0);
    let n = inst.n_claims();
    let payoffs = inst.scenario.payoffs();
    for _ in 0..trials {
        let x = rng.gen_range(-2.0..2.0);
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let h: Vec<f64> = payoffs.iter().map(|f| -dot(f, &q)).collect();
        let route_a = inst.cones.in_cone(&point(x, &q), ConeKind::ClK).unwrap_or(false);
        let route_b = poly.superreplication_price(&h) <= x + 1e-10;
        sr.residual(if route_a == route_b { 0.0 } else { 1.0 }, || format!("(x,q)=({x},{q:?})"));
    }
    let mut a1 = Tally::new("geometry.endowment_bound", "sup_Q E_Q[Σ_i |F^i_T|] < ∞", 0.0);
    let abs: Vec<f64> = payoffs.iter().map(|f| f.iter().map(|v| v.abs()).sum()).collect();
    let price = poly.superreplication_price(&abs);
    a1.residual(if price.is_finite() { 0.0 } else { f64::INFINITY }, || format!("price {price}"));
    vec![na.finish(), pol.finish(), sr.finish(), a1.finish()]
}

pub fn verify_finiteness(inst: &Instance, seed: u64) -> CheckRecord {
    let probes = FinitenessProbes::standard(inst, 8, seed);
    let rep = check_finiteness(inst, &probes);
    let mut t = Tally::new(
        "finiteness",
        "(u > −∞ on 𝒦, v < ∞ on ℒ) ⟺ (w > −∞ and w̃ < ∞ on (0,∞))",
        0.0,
    );
    t.residual(rep.counterexamples.len() as f64, || format!("counterexamples: {:?}", rep.counterexamples));
    for e in rep.errors {
        t.error(e);
    }
    let mut rec = t.finish();
    rec.probes = rep.probes;
    rec
}

/// Membership in 𝒜(x,q) and 𝒴(y,r) by the direct vertex tests against the bipolar
/// programs, on randomized processes scaled around the membership threshold.
pub fn verify_bipolar(inst: &Instance, trials: usize, seed: u64) -> Vec<CheckRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = inst.scenario.clock_support();
    let n_nodes = inst.scenario.n_nodes();
    let w = inst.scenario.clock_weights();
    let kp = probes::interior_k(&inst.cones, trials, seed ^ 21);
    let kb = probes::boundary_k(&inst.cones, 4, seed ^ 22);
    let lp = probes::interior_l(&inst.cones, trials, seed ^ 23);
    let lb = probes::boundary_l(&inst.cones, 4, seed ^ 24);

    let mut ta = Tally::new("bipolar.consumption", "c ∈ 𝒜(x,q) ⟺ E[∫cY dκ] ≤ xy + q·r ∀(y,r) ∈ ℒ, Y ∈ 𝒴(y,r)", 0.0);
    let mut members = 0usize;
    for t in 0..trials {
        let z = if t % 10 == 9 { kb[t / 10 % kb.len()].clone() } else { kp[t].clone() };
        let (x, q) = split(&z);
        let mut c = OptionalProcess::zeros(n_nodes);
        for &n in &nodes {
            if rng.gen_bool(0.75) {
                c.0[n] = rng.gen_range(0.1..2.0);
            }
        }
        let usage = inst.polytope.budget_usage(&w, c.values());
        let b: Vec<f64> = inst.polytope.endowment_expectations().iter().map(|p| x + dot(q, p)).collect();
        let crit = usage.iter().zip(&b).filter(|(u, _)| **u > 0.0).map(|(u, b)| b / u).fold(f64::INFINITY, f64::min);
        let scale = if crit.is_finite() { crit * rng.gen_range(0.5..1.5) } else { 1.0 };
        c.0.iter_mut().for_each(|v| *v *= scale);
        let a = is_feasible_consumption(&inst.scenario, &inst.polytope, &c, x, q, MEMBERSHIP_TOL);
        let bgap = consumption_dual_gap(inst, &c, x, q);
        match (a, bgap) {
            (Ok(a), Ok(g)) => {
                members += a.feasible as usize;
                let agree = a.feasible == (g <= MEMBERSHIP_TOL);
                ta.residual(if agree { 0.0 } else { 1.0 }, || format!("(x,q)={z:?}: vertex test {a:?}, bipolar gap {g:.3e}"));
            }
            (Err(e), _) | (_, Err(e)) => ta.error(format!("(x,q)={z:?}: {e}")),
        }
    }
    let mut rec_a = ta.finish();
    rec_a.note = Some(format!("{members} of {trials} processes feasible"));

    let mut ty = Tally::new("bipolar.deflator", "Y ∈ 𝒴(y,r) ⟺ E[∫cY dκ] ≤ xy + q·r ∀(x,q) ∈ 𝒦, c ∈ 𝒜(x,q)", 0.0);
    let mut members = 0usize;
    let jn = inst.polytope.len();
    for t in 0..trials {
        let z = if t % 10 == 9 { lb[t / 10 % lb.len()].clone() } else { lp[t].clone() };
        let (y, r) = split(&z);
        let lam: Vec<f64> = (0..jn).map(|_| if rng.gen_bool(0.6) { rng.gen_range(0.0..1.0) } else { 0.0 }).collect();
        let mut yp = OptionalProcess::zeros(n_nodes);
        for &n in &nodes {
            let base: f64 = lam.iter().zip(inst.polytope.densities()).map(|(l, d)| l * d.0[n]).sum();
            yp.0[n] = base.max(0.05) * rng.gen_range(0.7..1.3);
        }
        match deflator_capacity(inst, &yp, y, r) {
            Ok(cap) if cap.is_finite() && cap > 0.0 => yp.0.iter_mut().for_each(|v| *v *= cap * rng.gen_range(0.5..1.5)),
            Ok(_) => {}
            Err(e) => {
                ty.error(format!("(y,r)={z:?}: {e}"));
                continue;
            }
        }
        let a = is_in_y_yr(&inst.scenario, &inst.polytope, &inst.cones, &yp, y, r, MEMBERSHIP_TOL);
        let viol = y_yr_violation(&inst.scenario, &inst.polytope, &inst.cones, &yp, y, r);
        let bgap = deflator_primal_gap(inst, &yp, y, r);
        match (a, viol, bgap) {
            (Ok(a), Ok(v), Ok(g)) => {
                members += a as usize;
                let agree = a == (g <= MEMBERSHIP_TOL);
                ty.residual(if agree { 0.0 } else { 1.0 }, || {
                    format!("(y,r)={z:?}: domination violation {v:.3e}, bipolar gap {g:.3e}")
                });
            }
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => ty.error(format!("(y,r)={z:?}: {e}")),
        }
    }
    let mut rec_y = ty.finish();
    rec_y.note = Some(format!("{members} of {trials} processes in the domain"));
    vec![rec_a, rec_y]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aitken_limits() {
        let geo: Vec<f64> = (0..6).map(|m| 2.0 + 0.3f64.powi(m)).collect();
        assert!((tail_limit(&geo) - 2.0).abs() < 1e-12);
        let two: Vec<f64> = (0..6).map(|m| 1.0 + 0.6 * 0.1f64.sqrt().powi(m) + 1.5 * 0.1f64.powi(m)).collect();
        assert!((tail_limit(&two) - 1.0).abs() < 1e-12, "{}", tail_limit(&two));
        let logs: Vec<f64> = (0..6).map(|m| 1.0 + (10f64.powi(-m)).ln()).collect();
        assert_eq!(tail_limit(&logs), f64::NEG_INFINITY);
        let blow: Vec<f64> = (0..6).map(|m| 10f64.powi(m)).collect();
        assert_eq!(tail_limit(&blow), f64::INFINITY);
        assert_eq!(tail_limit(&[1.0, 1.0, 1.0, 1.0]), 1.0);
    }
}
