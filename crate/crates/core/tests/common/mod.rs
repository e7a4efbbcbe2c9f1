//! Independent reference computations for integration tests. Nothing here
//! calls into the crate's linear algebra.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

/// Gauss–Jordan inversion with partial pivoting.
pub fn gj_inverse(m: &Dense) -> Dense {
    let n = m.len();
    let mut a: Dense = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let p = a[col][col];
        assert!(p.abs() > 1e-300, "singular matrix");
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn ridge_design(xs: &[Vec<f64>], lambda: f64, d: usize) -> Dense {
    let mut a = vec![vec![0.0; d]; d];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = lambda;
    }
    for x in xs {
        for i in 0..d {
            for j in 0..d {
                a[i][j] += x[i] * x[j];
            }
        }
    }
    a
}

pub fn mat_vec(m: &Dense, x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Batch ridge estimate `(λI + XᵀX)⁻¹ Xᵀr`.
pub fn batch_ridge(xs: &[Vec<f64>], rs: &[f64], lambda: f64, d: usize) -> Vec<f64> {
    let inv = gj_inverse(&ridge_design(xs, lambda, d));
    let mut b = vec![0.0; d];
    for (x, r) in xs.iter().zip(rs) {
        for k in 0..d {
            b[k] += x[k] * r;
        }
    }
    mat_vec(&inv, &b)
}

pub fn max_abs_diff(a: &Dense, flat: &[f64]) -> f64 {
    let d = a.len();
    (0..d * d)
        .map(|k| (a[k / d][k % d] - flat[k]).abs())
        .fold(0.0, f64::max)
}

pub fn random_unit_ball(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = dot(&v, &v).sqrt().max(1.0);
    v.into_iter().map(|x| x / n).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The `q`-quantile normal critical value used for two-sided 99% intervals.
pub const Z99: f64 = 2.576;
