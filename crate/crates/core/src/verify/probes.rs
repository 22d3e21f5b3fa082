//! Seeded probe points in and on the boundary of the cones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::ConePair;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn min_qp(cones: &ConePair, q: &[f64]) -> f64 {
    cones.p_set().iter().map(|p| dot(p, q)).fold(f64::INFINITY, f64::min)
}

fn random_q(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-1.5..1.5)).collect()
}

fn simplex_weights(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn combine(points: &[Vec<f64>], weights: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (p, w) in points.iter().zip(weights) {
        for (o, v) in out.iter_mut().zip(p) {
            *o += w * v;
        }
    }
    out
}

/// Points (x, q) with x + q·p ≥ 0.2 on 𝒫̂.
pub fn interior_k(cones: &ConePair, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let n = cones.dim() - 1;
    (0..count)
        .map(|_| {
            let q = random_q(&mut r, n);
            let x = -min_qp(cones, &q) + r.gen_range(0.2..2.5);
            std::iter::once(x).chain(q).collect()
        })
        .collect()
}

/// Points y·(1, p) with y ∈ [0.2, 3] and p a strictly positive mixture of the vertices of 𝒫̂.
pub fn interior_l(cones: &ConePair, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let n = cones.dim() - 1;
    let verts = cones.p_set();
    (0..count)
        .map(|_| {
            let y = r.gen_range(0.2..3.0);
            let w = simplex_weights(&mut r, verts.len());
            let p = combine(verts, &w, n);
            std::iter::once(y).chain(p.into_iter().map(|v| y * v)).collect()
        })
        .collect()
}

/// The apex followed by points on facets x + q·p_k = 0 of cl 𝒦.
pub fn boundary_k(cones: &ConePair, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let n = cones.dim() - 1;
    let mut out = vec![vec![0.0; n + 1]];
    if n == 0 {
        return out;
    }
    while out.len() < count {
        let q = random_q(&mut r, n);
        let x = -min_qp(cones, &q);
        out.push(std::iter::once(x).chain(q).collect());
    }
    out
}

/// The apex, the generating rays (y, y·p_k) and points on the facets of cl ℒ.
pub fn boundary_l(cones: &ConePair, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let n = cones.dim() - 1;
    let verts = cones.p_set();
    let lift = |y: f64, p: &[f64]| std::iter::once(y).chain(p.iter().map(|v| y * v)).collect::<Vec<f64>>();
    let mut out = vec![vec![0.0; n + 1]];
    if n == 0 {
        return out;
    }
    for p in verts.iter().filter(|_| verts.len() >= 2) {
        if out.len() >= count {
            break;
        }
        out.push(lift(r.gen_range(0.5..2.0), p));
    }
    let facets: Vec<Vec<usize>> = cones
        .k_rays()
        .iter()
        .map(|g| (0..verts.len()).filter(|&k| dot(g, &lift(1.0, &verts[k])).abs() <= 1e-12).collect::<Vec<_>>())
        .filter(|f: &Vec<usize>| f.len() >= 2)
        .collect();
    let mut i = 0;
    while out.len() < count && !facets.is_empty() {
        let f = &facets[i % facets.len()];
        let pts: Vec<Vec<f64>> = f.iter().map(|&k| verts[k].clone()).collect();
        let w = simplex_weights(&mut r, pts.len());
        out.push(lift(r.gen_range(0.5..2.0), &combine(&pts, &w, n)));
        i += 1;
    }
    out
}

/// Unit-scale directions pointing into the open cone 𝒦 (resp. ℒ).
pub fn k_directions(cones: &ConePair, count: usize, seed: u64) -> Vec<Vec<f64>> {
    normalized(interior_k(cones, count, seed))
}

pub fn l_directions(cones: &ConePair, count: usize, seed: u64) -> Vec<Vec<f64>> {
    normalized(interior_l(cones, count, seed))
}

fn normalized(points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    points
        .into_iter()
        .map(|p| {
            let s = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            p.into_iter().map(|v| v / s).collect()
        })
        .collect()
}
