//! Brute-force reference values for trees with at most 9 leaves and 12 charged nodes.
//!
//! Both oracles work directly with the node variables (consumption, resp. deflator
//! and vertex weights) under linear constraints, using an augmented Lagrangian with a
//! spectral projected-gradient inner solver and several random starts. The final
//! iterate is scaled back into the feasible set before it is evaluated, so the primal
//! oracle returns a lower bound and the dual oracle an upper bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::membership::deflator_capacity;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::scenario::OptionalProcess;

pub const MAX_LEAVES: usize = 9;
pub const MAX_CLOCK_NODES: usize = 12;
const RESTARTS: usize = 4;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project(z: &mut [f64], lower: &[f64]) {
    z.iter_mut().zip(lower).for_each(|(v, l)| *v = v.max(*l));
}

/// Spectral projected gradient with a nonmonotone Armijo search on {z ≥ lower}.
fn spg(fun: &dyn Fn(&[f64]) -> (f64, Vec<f64>), lower: &[f64], z0: &[f64], iterations: usize) -> Vec<f64> {
    let mut z = z0.to_vec();
    project(&mut z, lower);
    let (mut f, mut g) = fun(&z);
    let mut hist = vec![f; 10];
    let mut alpha = 1.0 / g.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
    for it in 0..iterations {
        let mut d: Vec<f64> = z.iter().zip(&g).map(|(a, b)| a - alpha * b).collect();
        project(&mut d, lower);
        d.iter_mut().zip(&z).for_each(|(a, b)| *a -= b);
        let scale = z.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if d.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= 1e-14 * scale {
            break;
        }
        let fmax = hist.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gd = dot(&g, &d);
        let mut lam = 1.0;
        let (zt, ft, gt) = loop {
            let zt: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + lam * b).collect();
            let (ft, gt) = fun(&zt);
            if ft.is_finite() && ft <= fmax + 1e-4 * lam * gd {
                break (zt, ft, gt);
            }
            lam *= 0.5;
            if lam < 1e-20 {
                return z;
            }
        };
        let s: Vec<f64> = zt.iter().zip(&z).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sty = dot(&s, &yv);
        alpha = if sty > 0.0 { (dot(&s, &s) / sty).clamp(1e-14, 1e14) } else { 1e6 };
        z = zt;
        f = ft;
        g = gt;
        hist[it % 10] = f;
    }
    z
}

/// Minimizes a smooth convex function subject to `a·z ≤ b` row-wise and z ≥ lower.
fn augmented_lagrangian(
    objective: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
    a: &[Vec<f64>],
    b: &[f64],
    lower: &[f64],
    z0: &[f64],
) -> Vec<f64> {
    let mut mult = vec![0.0; a.len()];
    let mut rho = 10.0;
    let mut z = z0.to_vec();
    let mut last_viol = f64::INFINITY;
    for _ in 0..40 {
        let m = mult.clone();
        let lagr = |z: &[f64]| {
            let (mut f, mut g) = objective(z);
            for ((row, bj), mj) in a.iter().zip(b).zip(&m) {
                let s = (mj + rho * (dot(row, z) - bj)).max(0.0);
                f += (s * s - mj * mj) / (2.0 * rho);
                g.iter_mut().zip(row).for_each(|(gi, ri)| *gi += s * ri);
            }
            (f, g)
        };
        z = spg(&lagr, lower, &z, 40000);
        let mut viol: f64 = 0.0;
        for ((row, bj), mj) in a.iter().zip(b).zip(mult.iter_mut()) {
            let gj = dot(row, &z) - bj;
            viol = viol.max(gj / bj.abs().max(1.0));
            *mj = (*mj + rho * gj).max(0.0);
        }
        if viol <= 1e-13 {
            break;
        }
        if viol > 0.25 * last_viol {
            rho *= 5.0;
        }
        last_viol = viol;
    }
    z
}

fn check_size(inst: &Instance) -> Result<()> {
    let leaves = inst.scenario.tree().leaves().len();
    let nodes = inst.scenario.clock_support().len();
    if leaves > MAX_LEAVES || nodes > MAX_CLOCK_NODES {
        return Err(Error::Capacity { what: "oracle tree size (leaves, charged nodes)", count: leaves.max(nodes), cap: MAX_LEAVES });
    }
    Ok(())
}

/// sup Σ_n w(n) U(n, c(n)) over c ≥ 0 with E_{Q_j}[∫c dκ] ≤ x + q·p_j for every vertex.
pub fn brute_force_primal(inst: &Instance, x: f64, q: &[f64], seed: u64) -> Result<f64> {
    check_size(inst)?;
    let nodes = inst.scenario.clock_support();
    let w = inst.scenario.clock_weights();
    let dens = inst.polytope.densities();
    let b: Vec<f64> = inst.polytope.endowment_expectations().iter().map(|p| x + dot(q, p)).collect();
    if b.iter().any(|v| *v <= 0.0) {
        return Err(Error::Domain("the primal oracle needs an interior point of 𝒦".into()));
    }
    let a: Vec<Vec<f64>> = dens.iter().map(|z| nodes.iter().map(|&n| w[n] * z.0[n]).collect()).collect();
    let field = &inst.field;
    let objective = |c: &[f64]| {
        let mut f = 0.0;
        let mut g = vec![0.0; c.len()];
        for (i, &n) in nodes.iter().enumerate() {
            f -= w[n] * field.u(n, c[i]);
            g[i] = -w[n] * field.marginal(n, c[i]);
        }
        (f, g)
    };
    let lower = vec![1e-10; nodes.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..RESTARTS {
        let mut c0: Vec<f64> = (0..nodes.len()).map(|_| rng.gen_range(0.2..2.0)).collect();
        let s = a.iter().zip(&b).map(|(r, bj)| bj / dot(r, &c0)).fold(f64::INFINITY, f64::min);
        c0.iter_mut().for_each(|v| *v *= 0.5 * s);
        let mut c = augmented_lagrangian(&objective, &a, &b, &lower, &c0);
        let s = a.iter().zip(&b).map(|(r, bj)| bj / dot(r, &c)).fold(1.0f64, f64::min);
        c.iter_mut().for_each(|v| *v *= s);
        let value = -objective(&c).0;
        best = best.max(value);
    }
    Ok(best)
}

/// inf Σ_n w(n) V(n, Y(n)) over Y ∈ 𝒴(y,r), using Y ≤ Σ_j λ_j Z^j with the spent
/// budget Σ_j λ_j (1, p_j) dominated by (y,r) in the order of cl ℒ.
pub fn brute_force_dual(inst: &Instance, y: f64, r: &[f64], seed: u64) -> Result<f64> {
    check_size(inst)?;
    let point: Vec<f64> = std::iter::once(y).chain(r.iter().copied()).collect();
    let nodes = inst.scenario.clock_support();
    let m = nodes.len();
    let w = inst.scenario.clock_weights();
    let dens = inst.polytope.densities();
    let exps = inst.polytope.endowment_expectations();
    let jn = dens.len();
    let rays = inst.cones.k_rays();
    if rays.iter().any(|g| dot(g, &point) <= 0.0) {
        return Err(Error::Domain("the dual oracle needs an interior point of ℒ".into()));
    }
    // Variables: Y on the charged nodes, then λ.
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (i, &n) in nodes.iter().enumerate() {
        let mut row = vec![0.0; m + jn];
        row[i] = 1.0;
        for j in 0..jn {
            row[m + j] = -dens[j].0[n];
        }
        a.push(row);
        b.push(0.0);
    }
    for g in rays {
        let mut row = vec![0.0; m + jn];
        for j in 0..jn {
            let lifted: Vec<f64> = std::iter::once(1.0).chain(exps[j].iter().copied()).collect();
            row[m + j] = dot(g, &lifted);
        }
        a.push(row);
        b.push(dot(g, &point));
    }
    let field = &inst.field;
    let objective = |z: &[f64]| {
        let mut f = 0.0;
        let mut g = vec![0.0; z.len()];
        for (i, &n) in nodes.iter().enumerate() {
            f += w[n] * field.v(n, z[i]);
            g[i] = -w[n] * field.inv(n, z[i]);
        }
        (f, g)
    };
    let mut lower = vec![1e-10; m];
    lower.extend(vec![0.0; jn]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..RESTARTS {
        let mut lam: Vec<f64> = (0..jn).map(|_| rng.gen_range(0.1..1.0)).collect();
        let spent = |lam: &[f64], g: &[f64]| -> f64 {
            lam.iter()
                .zip(exps)
                .map(|(l, p)| l * dot(g, &std::iter::once(1.0).chain(p.iter().copied()).collect::<Vec<_>>()))
                .sum()
        };
        let s = rays
            .iter()
            .map(|g| {
                let d = spent(&lam, g);
                if d > 0.0 {
                    dot(g, &point) / d
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min);
        lam.iter_mut().for_each(|l| *l *= 0.9 * s.min(1e6));
        let mut z0: Vec<f64> = nodes
            .iter()
            .map(|&n| 0.9 * lam.iter().zip(dens).map(|(l, d)| l * d.0[n]).sum::<f64>())
            .collect();
        z0.extend(lam);
        let z = augmented_lagrangian(&objective, &a, &b, &lower, &z0);
        let mut target = OptionalProcess::zeros(inst.scenario.n_nodes());
        for (i, &n) in nodes.iter().enumerate() {
            target.0[n] = z[i];
        }
        let cap = deflator_capacity(inst, &target, y, r)?;
        if !(cap.is_finite() && cap > 0.0) {
            continue;
        }
        let value: f64 = nodes.iter().map(|&n| w[n] * field.v(n, cap * target.0[n])).sum();
        best = best.min(value);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::policy::NumericPolicy;
    use crate::utility::UtilityField;

    fn inst(s: crate::scenario::MarketScenario) -> Instance {
        Instance::new(s, UtilityField::log(), NumericPolicy::default()).unwrap()
    }

    #[test]
    fn fixture_values() {
        let d = inst(fixtures::det1());
        assert!(brute_force_primal(&d, 1.0, &[], 1).unwrap().abs() < 1e-6);
        assert!((brute_force_dual(&d, 1.0, &[], 1).unwrap() + 1.0).abs() < 1e-6);
        let b = inst(fixtures::bin1());
        let c = 0.5 * (9.0f64 / 8.0).ln();
        assert!((brute_force_primal(&b, 1.0, &[], 1).unwrap() - c).abs() < 1e-4);
        assert!((brute_force_dual(&b, 1.0, &[], 1).unwrap() - (c - 1.0)).abs() < 1e-4);
    }

    #[test]
    fn trinomial_matches_solver() {
        let t = inst(fixtures::tri1());
        let u = t.u(1.0, &[0.5]).unwrap();
        assert!((brute_force_primal(&t, 1.0, &[0.5], 3).unwrap() - u).abs() < 1e-4);
        let v = t.v(1.0, &[0.1]).unwrap();
        assert!((brute_force_dual(&t, 1.0, &[0.1], 3).unwrap() - v).abs() < 1e-4);
    }
}
