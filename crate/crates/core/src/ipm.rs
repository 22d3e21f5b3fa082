//! Log-barrier Newton method for
//!
//! ```text
//! minimize  F(λ) = Σ_n w_n V(n, (Zλ)_n) + c·λ   subject to  Eλ = e,  λ ≥ 0
//! ```
//!
//! with V the conjugate field. Both solvers reduce to this form. Steps are taken in
//! the scaled variable λ = Λ·d so that the barrier Hessian becomes t·I.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::utility::UtilityField;

pub(crate) struct SeparableProblem<'a> {
    pub field: &'a UtilityField,
    /// Tree node of each row of `z`.
    pub nodes: Vec<usize>,
    pub weights: Vec<f64>,
    /// Rows = nodes, columns = variables.
    pub z: DMatrix<f64>,
    pub cost: DVector<f64>,
    pub eq: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmOutcome {
    pub lambda: DVector<f64>,
    /// Multipliers of `Eλ = e`: ∇F + Eᵀν ≥ 0 at the optimum.
    pub nu: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
}

const GAP_REL: f64 = 1e-13;
const MAX_CENTERING: usize = 80;

impl SeparableProblem<'_> {
    pub fn n_vars(&self) -> usize {
        self.z.ncols()
    }

    fn deflator(&self, lambda: &DVector<f64>) -> DVector<f64> {
        &self.z * lambda
    }

    pub fn objective(&self, lambda: &DVector<f64>) -> f64 {
        let y = self.deflator(lambda);
        let mut f = self.cost.dot(lambda);
        for (i, &n) in self.nodes.iter().enumerate() {
            f += self.weights[i] * self.field.v(n, y[i].max(0.0));
        }
        f
    }

    fn barrier(&self, lambda: &DVector<f64>, t: f64) -> f64 {
        if lambda.iter().any(|&l| !(l > 0.0)) {
            return f64::INFINITY;
        }
        let f = self.objective(lambda);
        f - t * lambda.iter().map(|l| l.ln()).sum::<f64>()
    }

    /// Gradient of F and the curvature weights w_n V''(Y_n).
    fn derivatives(&self, lambda: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let y = self.deflator(lambda);
        let m = self.nodes.len();
        let mut dv = DVector::zeros(m);
        let mut d2 = DVector::zeros(m);
        for (i, &n) in self.nodes.iter().enumerate() {
            dv[i] = -self.weights[i] * self.field.inv(n, y[i]);
            d2[i] = self.weights[i] * self.field.v_second(n, y[i]);
        }
        (self.z.tr_mul(&dv) + &self.cost, d2)
    }
}

/// Runs the barrier method from a strictly positive `lambda0`.
pub(crate) fn minimize(p: &SeparableProblem<'_>, lambda0: DVector<f64>, max_iterations: usize) -> Result<IpmOutcome> {
    let j = p.n_vars();
    let k = p.eq.nrows();
    if j == 0 {
        return Ok(IpmOutcome { lambda: lambda0, nu: DVector::zeros(k), objective: p.objective(&DVector::zeros(0)), iterations: 0 });
    }
    if lambda0.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidInput("barrier start must be strictly positive".into()));
    }
    let mut lambda = lambda0;
    let f0 = p.objective(&lambda);
    if !f0.is_finite() {
        return Err(Error::InvalidInput("barrier start has non-finite objective".into()));
    }
    let mut t = 0.1 * f0.abs().max(1.0) / j as f64;
    let mut nu = DVector::zeros(k);
    let mut iterations = 0;

    loop {
        let mut stalled = 0;
        for _ in 0..MAX_CENTERING {
            if iterations >= max_iterations {
                return Err(Error::Convergence {
                    iterations,
                    detail: format!("barrier parameter {t:.3e} with {j} variables"),
                });
            }
            iterations += 1;
            let (grad, d2) = p.derivatives(&lambda);
            let g: DVector<f64> = DVector::from_fn(j, |i, _| lambda[i] * grad[i] - t);
            // Scaled Hessian Λ Zᵀ D Z Λ + t I.
            let zl = DMatrix::from_fn(p.z.nrows(), j, |r, c| p.z[(r, c)] * lambda[c] * d2[r].sqrt());
            let mut h = zl.tr_mul(&zl);
            for i in 0..j {
                h[(i, i)] += t;
            }
            let el = DMatrix::from_fn(k, j, |r, c| p.eq[(r, c)] * lambda[c]);
            let resid = &p.eq_rhs - &p.eq * &lambda;
            let feasible = resid.amax() <= 1e-11 * p.eq_rhs.amax().max(1.0);
            // A roundoff-level residual is not worth a correction through a tiny pivot.
            let target = if feasible { DVector::zeros(k) } else { resid.clone() };

            let Some((d, step_nu)) = newton_step(&h, &g, &el, &target) else {
                return Err(Error::Convergence { iterations, detail: "singular Newton system".into() });
            };
            nu = step_nu;
            let decrement = d.dot(&(&h * &d));
            let fb = p.barrier(&lambda, t);

            let mut alpha: f64 = 1.0;
            for &di in d.iter() {
                if di < 0.0 {
                    alpha = alpha.min(-0.995 / di);
                }
            }
            let slope = g.dot(&d);
            let slack = 16.0 * f64::EPSILON * fb.abs().max(1.0);
            let mut accepted = false;
            let mut decrease = 0.0;
            for _ in 0..60 {
                let trial = DVector::from_fn(j, |i, _| lambda[i] * (1.0 + alpha * d[i]));
                let ft = p.barrier(&trial, t);
                if ft.is_finite() && ft <= fb + 1e-4 * alpha * slope.min(0.0) + slack {
                    lambda = trial;
                    accepted = true;
                    decrease = fb - ft;
                    break;
                }
                alpha *= 0.5;
            }
            let centred = decrement / 2.0 <= (0.1 * j as f64 * t).min(1e-6 * fb.abs().max(1.0))
                || decrement / 2.0 <= 1e-15 * fb.abs().max(1.0);
            // steps that only move the barrier at roundoff level make no progress
            stalled = if decrease <= 64.0 * f64::EPSILON * fb.abs().max(1.0) { stalled + 1 } else { 0 };
            if !accepted || stalled >= 3 || (centred && feasible) || (d.amax() <= 1e-15 && feasible) {
                break;
            }
        }
        let f = p.objective(&lambda);
        if j as f64 * t <= GAP_REL * f.abs().max(1.0) {
            return Ok(IpmOutcome { lambda, nu, objective: f, iterations });
        }
        t *= 0.1;
    }
}

/// Solves `H d + Mᵀν = −g`, `M d = r` in the metric of H: with H = LLᵀ and
/// d = L⁻ᵀw the step is a least-norm projection onto the null space of A = ML⁻ᵀ.
fn newton_step(h: &DMatrix<f64>, g: &DVector<f64>, m: &DMatrix<f64>, r: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let j = h.nrows();
    let k = m.nrows();
    let Some(chol) = h.clone().cholesky() else {
        return (k == 0).then(|| spd_solve(h, &(-g)).map(|d| (d, DVector::zeros(0)))).flatten();
    };
    let l = chol.l();
    let hw = l.solve_lower_triangular(g)?;
    if k == 0 {
        let d = l.tr_solve_lower_triangular(&(-&hw))?;
        return d.iter().all(|v| v.is_finite()).then_some((d, DVector::zeros(0)));
    }
    let at = l.solve_lower_triangular(&m.transpose())?;
    let cols = j.max(k);
    let mut padded = DMatrix::zeros(j, cols);
    padded.view_mut((0, 0), (j, k)).copy_from(&at);
    let svd = padded.svd(true, true);
    let u = svd.u?;
    let v_t = svd.v_t?;
    let sig = &svd.singular_values;
    let smax = sig.amax();
    let mut order: Vec<usize> = (0..sig.len()).collect();
    order.sort_by(|&a, &b| sig[b].total_cmp(&sig[a]));
    let range: Vec<usize> = order.iter().copied().filter(|&i| sig[i] > 1e-14 * smax).take(k).collect();

    // w = −(I − UUᵀ)h + U S⁻¹ Vᵀ r on the range of Aᵀ
    let mut w = -&hw;
    for &i in &range {
        let ui = u.column(i);
        let back = (0..k).map(|c| v_t[(i, c)] * r[c]).sum::<f64>() / sig[i];
        w.axpy(ui.dot(&hw) + back, &ui, 1.0);
    }
    let mut d = l.tr_solve_lower_triangular(&w)?;
    // refine M d = r; the correction is the least H-norm step, so it stays in the
    // same metric and leaves the stationarity part untouched
    for _ in 0..2 {
        let rho = r - m * &d;
        let mut dw = DVector::zeros(j);
        for &i in &range {
            let back = (0..k).map(|c| v_t[(i, c)] * rho[c]).sum::<f64>() / sig[i];
            dw.axpy(back, &u.column(i), 1.0);
        }
        d += l.tr_solve_lower_triangular(&dw)?;
        w += dw;
    }
    let dual_rhs = -(&hw + &w);
    let mut nu = DVector::zeros(k);
    for &i in &range {
        let coef = u.column(i).dot(&dual_rhs) / sig[i];
        for c in 0..k {
            nu[c] += coef * v_t[(i, c)];
        }
    }
    (d.iter().chain(nu.iter()).all(|v| v.is_finite())).then_some((d, nu))
}

fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        let x = ch.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    let x = a.clone().lu().solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Minimizes s ↦ φ(s) over s > 0 for a convex scalar function by golden section on log s.
pub(crate) fn scalar_argmin(phi: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let f = |u: f64| {
        let v = phi(u.exp());
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..120 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    ((lo + hi) / 2.0).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_log_problem() {
        // min −log(λ) − 1 + 2λ: λ* = 1/2.
        let field = UtilityField::log();
        let p = SeparableProblem {
            field: &field,
            nodes: vec![0],
            weights: vec![1.0],
            z: DMatrix::from_element(1, 1, 1.0),
            cost: DVector::from_element(1, 2.0),
            eq: DMatrix::zeros(0, 1),
            eq_rhs: DVector::zeros(0),
        };
        let out = minimize(&p, DVector::from_element(1, 3.0), 500).unwrap();
        assert!((out.lambda[0] - 0.5).abs() < 1e-10, "{}", out.lambda[0]);
        assert!((out.objective - (2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn equality_constrained_split() {
        // min Σ_i ½(−log λ_i − 1) with λ_1 + λ_2 = 2: λ = (1,1).
        let field = UtilityField::log();
        let p = SeparableProblem {
            field: &field,
            nodes: vec![0, 0],
            weights: vec![0.5, 0.5],
            z: DMatrix::identity(2, 2),
            cost: DVector::zeros(2),
            eq: DMatrix::from_element(1, 2, 1.0),
            eq_rhs: DVector::from_element(1, 2.0),
        };
        let out = minimize(&p, DVector::from_vec(vec![0.3, 1.7]), 500).unwrap();
        assert!((out.lambda[0] - 1.0).abs() < 1e-8);
        assert!((out.nu[0] - 0.5).abs() < 1e-8, "{}", out.nu[0]);
    }

    #[test]
    fn scalar_argmin_quadratic() {
        let s = scalar_argmin(|s| (s - 3.0).powi(2));
        assert!((s - 3.0).abs() < 1e-8);
    }
}
