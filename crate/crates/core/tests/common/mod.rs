//! Independent oracles shared by the property suites and the acceptance gate.
#![allow(dead_code)]

use ndarray::Array2;

/// Solves `(X^T W X) beta = X^T W y` by Gaussian elimination with partial pivoting.
pub fn normal_equations(x: &Array2<f64>, y: &[f64], w: &[f64]) -> Vec<f64> {
    let (n, p) = x.dim();
    let mut a = vec![vec![0.0; p + 1]; p];
    for r in 0..p {
        for c in 0..p {
            a[r][c] = (0..n).map(|i| w[i] * x[[i, r]] * x[[i, c]]).sum();
        }
        a[r][p] = (0..n).map(|i| w[i] * x[[i, r]] * y[i]).sum();
    }
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for r in col + 1..p {
            let f = a[r][col] / a[col][col];
            for c in col..=p {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut beta = vec![0.0; p];
    for r in (0..p).rev() {
        let s: f64 = (r + 1..p).map(|c| a[r][c] * beta[c]).sum();
        beta[r] = (a[r][p] - s) / a[r][r];
    }
    beta
}

/// `P(W >= w)` for the rank sum of `m` of `n` untied ranks, by listing every subset.
pub fn enumerate_rank_sum_upper(n: usize, m: usize, w: f64) -> f64 {
    let mut hit = 0u64;
    let mut total = 0u64;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != m {
            continue;
        }
        total += 1;
        let s: usize = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum();
        hit += (s as f64 >= w) as u64;
    }
    hit as f64 / total as f64
}
