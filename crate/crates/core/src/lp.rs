//! Dense two-phase simplex for small linear programs.
//!
//! Solves `maximize c·x` subject to rows `a·x {≤,=,≥} b` and `x ≥ 0`. Bland's rule
//! keeps pivoting finite on degenerate problems; sizes here are a few hundred
//! columns at most.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    n: usize,
    objective: Vec<f64>,
    rows: Vec<Constraint>,
}

const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 50_000;

impl LinearProgram {
    pub fn new(n: usize) -> Self {
        Self { n, objective: vec![0.0; n], rows: Vec::new() }
    }

    pub fn maximize(mut self, c: Vec<f64>) -> Self {
        assert_eq!(c.len(), self.n);
        self.objective = c;
        self
    }

    pub fn constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.n);
        self.rows.push(Constraint { coeffs, relation, rhs });
    }

    pub fn solve(&self) -> LpOutcome {
        // normalize to nonnegative right-hand sides
        let rows: Vec<Constraint> = self
            .rows
            .iter()
            .map(|r| {
                if r.rhs < 0.0 {
                    Constraint {
                        coeffs: r.coeffs.iter().map(|a| -a).collect(),
                        relation: match r.relation {
                            Relation::Le => Relation::Ge,
                            Relation::Ge => Relation::Le,
                            Relation::Eq => Relation::Eq,
                        },
                        rhs: -r.rhs,
                    }
                } else {
                    r.clone()
                }
            })
            .collect();
        let m = rows.len();
        let n_slack = rows.iter().filter(|r| r.relation != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.relation != Relation::Le).count();
        let cols = self.n + n_slack + n_art;
        let width = cols + 1;
        let mut t = vec![vec![0.0; width]; m];
        let mut basis = vec![0usize; m];
        let mut is_art = vec![false; cols];
        let (mut s, mut a) = (self.n, self.n + n_slack);
        for (i, r) in rows.iter().enumerate() {
            t[i][..self.n].copy_from_slice(&r.coeffs);
            t[i][cols] = r.rhs;
            match r.relation {
                Relation::Le => {
                    t[i][s] = 1.0;
                    basis[i] = s;
                    s += 1;
                }
                Relation::Ge => {
                    t[i][s] = -1.0;
                    s += 1;
                    t[i][a] = 1.0;
                    is_art[a] = true;
                    basis[i] = a;
                    a += 1;
                }
                Relation::Eq => {
                    t[i][a] = 1.0;
                    is_art[a] = true;
                    basis[i] = a;
                    a += 1;
                }
            }
        }

        // phase one: minimize the sum of artificials
        if n_art > 0 {
            let cost: Vec<f64> = (0..cols).map(|j| if is_art[j] { -1.0 } else { 0.0 }).collect();
            if !run_simplex(&mut t, &mut basis, &cost, &vec![true; cols]) {
                return LpOutcome::Infeasible;
            }
            let infeas: f64 = basis.iter().enumerate().filter(|(_, &b)| is_art[b]).map(|(i, _)| t[i][cols]).sum();
            let scale = 1.0 + rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
            if infeas > 1e-9 * scale {
                return LpOutcome::Infeasible;
            }
            // drive remaining artificials out of the basis where possible
            for i in 0..m {
                if is_art[basis[i]] {
                    if let Some(j) = (0..cols).find(|&j| !is_art[j] && t[i][j].abs() > 1e-9) {
                        pivot(&mut t, &mut basis, i, j);
                    }
                }
            }
        }
        let mut cost = vec![0.0; cols];
        cost[..self.n].copy_from_slice(&self.objective);
        let allowed: Vec<bool> = (0..cols).map(|j| !is_art[j]).collect();
        if !run_simplex(&mut t, &mut basis, &cost, &allowed) {
            return LpOutcome::Unbounded;
        }
        let mut x = vec![0.0; self.n];
        for (i, &b) in basis.iter().enumerate() {
            if b < self.n {
                x[b] = t[i][cols].max(0.0);
            }
        }
        let value = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        LpOutcome::Optimal { x, value }
    }
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, c: usize) {
    let p = t[r][c];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let prow = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != r {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
    }
    basis[r] = c;
}

/// Maximizes `cost·x` from the current basic feasible tableau. Returns false when
/// the objective is unbounded.
fn run_simplex(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: &[bool]) -> bool {
    let cols = cost.len();
    let rhs = cols;
    for _ in 0..MAX_PIVOTS {
        // reduced costs c_j − c_B B⁻¹ A_j
        let mut entering = None;
        for j in 0..cols {
            if !allowed[j] || basis.contains(&j) {
                continue;
            }
            let mut rc = cost[j];
            for (i, &b) in basis.iter().enumerate() {
                rc -= cost[b] * t[i][j];
            }
            if rc > PIVOT_TOL {
                entering = Some(j);
                break;
            }
        }
        let Some(c) = entering else { return true };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..t.len() {
            if t[i][c] > PIVOT_TOL {
                let ratio = t[i][rhs] / t[i][c];
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-14 || (ratio <= lr + 1e-14 && basis[i] < basis[li]) {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((r, _)) = leave else { return false };
        pivot(t, basis, r, c);
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_maximization() {
        // max 3x + 2y, x + y ≤ 4, x + 3y ≤ 6, x ≤ 3
        let mut lp = LinearProgram::new(2).maximize(vec![3.0, 2.0]);
        lp.constraint(vec![1.0, 1.0], Relation::Le, 4.0);
        lp.constraint(vec![1.0, 3.0], Relation::Le, 6.0);
        lp.constraint(vec![1.0, 0.0], Relation::Le, 3.0);
        match lp.solve() {
            LpOutcome::Optimal { x, value } => {
                assert!((value - 11.0).abs() < 1e-12);
                assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + y  s.t. x + 2y = 4, x ≥ 1  (as max −x − y)
        let mut lp = LinearProgram::new(2).maximize(vec![-1.0, -1.0]);
        lp.constraint(vec![1.0, 2.0], Relation::Eq, 4.0);
        lp.constraint(vec![1.0, 0.0], Relation::Ge, 1.0);
        let v = lp.solve().value().unwrap();
        assert!((v + 2.5).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.constraint(vec![1.0], Relation::Ge, 2.0);
        lp.constraint(vec![1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve(), LpOutcome::Infeasible);
        let mut lp = LinearProgram::new(2).maximize(vec![1.0, 0.0]);
        lp.constraint(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn negative_rhs_is_normalized() {
        // max −x s.t. −x ≤ −2  ⇒ x = 2
        let mut lp = LinearProgram::new(1).maximize(vec![-1.0]);
        lp.constraint(vec![-1.0], Relation::Le, -2.0);
        assert!((lp.solve().value().unwrap() + 2.0).abs() < 1e-12);
    }
}
