//! Finiteness of (u, v) on the open cones versus finiteness of (w, w̃) on (0, ∞).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::verify::probes;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitenessProbes {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub k_points: Vec<Vec<f64>>,
    pub l_points: Vec<Vec<f64>>,
}

impl FinitenessProbes {
    pub fn standard(inst: &Instance, count: usize, seed: u64) -> Self {
        let grid = vec![0.01, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0];
        Self {
            x: grid.clone(),
            y: grid,
            k_points: probes::interior_k(&inst.cones, count, seed),
            l_points: probes::interior_l(&inst.cones, count, seed ^ 0x5eed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitenessReport {
    /// u > −∞ and v < +∞ at every interior probe.
    pub uv_finite: bool,
    /// w > −∞ and w̃ < +∞ at every grid probe.
    pub w_finite: bool,
    pub consistent: bool,
    pub probes: usize,
    /// Probes whose value breaks the pattern of the other side.
    pub counterexamples: Vec<String>,
    pub errors: Vec<String>,
}

enum Eval {
    Finite,
    Infinite(String),
    Failed(String),
}

fn classify(label: String, v: crate::Result<f64>, bad: impl Fn(f64) -> bool) -> Eval {
    match v {
        Ok(v) if bad(v) || v.is_nan() => Eval::Infinite(format!("{label} = {v}")),
        Ok(_) => Eval::Finite,
        Err(e) => Eval::Failed(format!("{label}: {e}")),
    }
}

pub fn check_finiteness(inst: &Instance, probes: &FinitenessProbes) -> FinitenessReport {
    let side_uv: Vec<Eval> = probes
        .k_points
        .par_iter()
        .map(|p| classify(format!("u{p:?}"), inst.u(p[0], &p[1..]), |v| v == f64::NEG_INFINITY))
        .chain(probes.l_points.par_iter().map(|p| classify(format!("v{p:?}"), inst.v(p[0], &p[1..]), |v| v == f64::INFINITY)))
        .collect();
    let side_w: Vec<Eval> = probes
        .x
        .par_iter()
        .map(|&x| classify(format!("w({x})"), inst.w(x), |v| v == f64::NEG_INFINITY))
        .chain(probes.y.par_iter().map(|&y| classify(format!("w̃({y})"), inst.wtilde(y), |v| v == f64::INFINITY)))
        .collect();
    let mut errors = Vec::new();
    let mut infinite = |side: &[Eval]| {
        let mut out = Vec::new();
        for e in side {
            match e {
                Eval::Finite => {}
                Eval::Infinite(s) => out.push(s.clone()),
                Eval::Failed(s) => errors.push(s.clone()),
            }
        }
        out
    };
    let bad_uv = infinite(&side_uv);
    let bad_w = infinite(&side_w);
    let uv_finite = bad_uv.is_empty();
    let w_finite = bad_w.is_empty();
    let counterexamples = if uv_finite == w_finite {
        Vec::new()
    } else if uv_finite {
        bad_w
    } else {
        bad_uv
    };
    FinitenessReport {
        uv_finite,
        w_finite,
        consistent: uv_finite == w_finite && errors.is_empty(),
        probes: side_uv.len() + side_w.len(),
        counterexamples,
        errors,
    }
}
