//! Exact rational linear algebra used by vertex and ray enumeration.

use num::{BigRational, One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn to_rational(x: f64) -> Rational {
    BigRational::from_float(x).expect("finite inputs are validated upstream")
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rref(m: &mut [Vec<Rational>]) -> Vec<usize> {
    let rows = m.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = m[0].len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for v in m[r].iter_mut() {
            *v = &*v * &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let delta = &f * &m[r][j];
                    m[i][j] -= delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(m: &[Vec<Rational>]) -> usize {
    let mut w = m.to_vec();
    rref(&mut w).len()
}

/// Basis of {z : m z = 0}, `cols` being the ambient dimension.
pub fn nullspace(m: &[Vec<Rational>], cols: usize) -> Vec<Vec<Rational>> {
    let mut w = m.to_vec();
    let pivots = rref(&mut w);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut z = vec![Rational::zero(); cols];
            z[f] = Rational::one();
            for (row, &pc) in pivots.iter().enumerate() {
                z[pc] = -w[row][f].clone();
            }
            z
        })
        .collect()
}

/// Greedy selection of linearly independent rows, in order.
pub fn independent_rows(m: &[Vec<Rational>]) -> Vec<usize> {
    let mut chosen: Vec<Vec<Rational>> = Vec::new();
    let mut idx = Vec::new();
    for (i, row) in m.iter().enumerate() {
        chosen.push(row.clone());
        if rank(&chosen) == chosen.len() {
            idx.push(i);
        } else {
            chosen.pop();
        }
    }
    idx
}

/// Solves `a x = b` when `a` has full column rank and the system is consistent.
pub fn solve_full_column_rank(a: &[Vec<Rational>], b: &[Rational]) -> Option<Vec<Rational>> {
    let cols = a.first().map_or(0, |r| r.len());
    let mut aug: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.len() != cols || pivots.iter().any(|&p| p == cols) {
        return None;
    }
    Some((0..cols).map(|i| aug[i][cols].clone()).collect())
}

/// Inverse of a square nonsingular matrix.
pub fn inverse(a: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = a.len();
    let mut aug: Vec<Vec<Rational>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }));
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.len() < n || pivots[n - 1] >= n {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Scales a nonzero vector so that its largest absolute entry is 1.
pub fn normalize_max(v: &mut [Rational]) {
    let m = v.iter().map(|x| x.abs()).max().unwrap_or_else(Rational::zero);
    if !m.is_zero() {
        for x in v.iter_mut() {
            *x = &*x / &m;
        }
    }
}
