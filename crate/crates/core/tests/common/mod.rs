//! Brute-force LP oracle shared by the LP tests and the acceptance suite.
#![allow(dead_code)]

use nmfbandit::lp::{Constraint, LinearProgram, Relation};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Rows `a x (rel) b` used by the brute-force oracle (nonnegativity included).
pub struct Problem {
    pub c: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Relation, f64)>,
}

pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for k in col..n {
                    a[r][k] -= f * a[col][k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Minimum over all basic feasible points; `None` when the polytope is empty.
pub fn vertex_enumeration(p: &Problem) -> Option<f64> {
    let n = p.c.len();
    let mut all: Vec<(Vec<f64>, Relation, f64)> = p.rows.clone();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        all.push((e, Relation::Ge, 0.0));
    }
    let feasible = |x: &[f64]| {
        all.iter().all(|(a, rel, b)| {
            let v: f64 = a.iter().zip(x).map(|(u, w)| u * w).sum();
            match rel {
                Relation::Le => v <= b + 1e-9,
                Relation::Ge => v >= b - 1e-9,
                Relation::Eq => (v - b).abs() <= 1e-9,
            }
        })
    };
    let k = all.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| all[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| all[i].2).collect();
        if let Some(x) = solve_square(a, b) {
            if feasible(&x) {
                let v: f64 = p.c.iter().zip(&x).map(|(u, w)| u * w).sum();
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        // Next combination of n out of k.
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < k - n + i {
                idx[i] += 1;
                for t in i + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn random_problem(rng: &mut ChaCha8Rng) -> Problem {
    let n = rng.random_range(3..=5);
    let m = rng.random_range(2..=4);
    let c = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut rows = Vec::new();
    for _ in 0..m {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        rows.push((a, Relation::Le, rng.random_range(0.5..2.0)));
    }
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let rel = if rng.random_bool(0.5) {
        Relation::Ge
    } else {
        Relation::Eq
    };
    rows.push((a, rel, rng.random_range(0.1..1.5)));
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rows.push((e, Relation::Le, 5.0));
    }
    Problem { c, rows }
}

pub fn to_lp(p: &Problem) -> LinearProgram {
    let mut lp = LinearProgram::new(p.c.clone());
    for (a, rel, b) in &p.rows {
        lp.add(Constraint::dense(a, *rel, *b));
    }
    lp
}
