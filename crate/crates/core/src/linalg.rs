//! Householder QR for tall dense least-squares problems.
//!
//! The factorization works on column-major storage so the inner loops are
//! contiguous slice operations.

use ndarray::Array2;

use crate::scalar::Scalar;

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Compact Householder factorization `A = QR` of an `n x p` matrix, `n >= p`.
///
/// Column `j` holds `R[..=j, j]` in its first `j + 1` entries and the
/// Householder vector (with implicit unit leading entry) below the diagonal.
#[derive(Debug, Clone)]
pub struct Qr<T> {
    cols: Vec<Vec<T>>,
    tau: Vec<T>,
    nrows: usize,
}

impl<T: Scalar> Qr<T> {
    /// Factorizes columns given as contiguous vectors of equal length.
    pub fn from_columns(mut cols: Vec<Vec<T>>) -> Self {
        let p = cols.len();
        let n = cols.first().map_or(0, Vec::len);
        debug_assert!(cols.iter().all(|c| c.len() == n));
        let mut tau = vec![T::zero(); p];
        for j in 0..p.min(n) {
            let (head, tail) = cols.split_at_mut(j + 1);
            let col = &mut head[j];
            let x0 = col[j];
            let tail_norm2 = dot(&col[j + 1..], &col[j + 1..]);
            if tail_norm2 == T::zero() {
                // Already upper triangular in this column; H = I.
                tau[j] = T::zero();
                continue;
            }
            let norm = (x0 * x0 + tail_norm2).sqrt();
            let beta = if x0 >= T::zero() { -norm } else { norm };
            tau[j] = (beta - x0) / beta;
            let scale = T::one() / (x0 - beta);
            for v in &mut col[j + 1..] {
                *v = *v * scale;
            }
            col[j] = beta;
            let v_tail = &col[j + 1..];
            for other in tail.iter_mut() {
                let s = other[j] + dot(v_tail, &other[j + 1..]);
                let f = tau[j] * s;
                other[j] = other[j] - f;
                for (o, &v) in other[j + 1..].iter_mut().zip(v_tail) {
                    *o = *o - f * v;
                }
            }
        }
        Self {
            cols,
            tau,
            nrows: n,
        }
    }

    pub fn from_array(a: &Array2<T>) -> Self {
        let cols = a.columns().into_iter().map(|c| c.to_vec()).collect();
        Self::from_columns(cols)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    /// Diagonal of `R`.
    pub fn r_diag(&self) -> Vec<T> {
        self.cols.iter().enumerate().map(|(j, c)| c[j]).collect()
    }

    /// Overwrites `b` with `Q^T b`.
    pub fn apply_qt(&self, b: &mut [T]) {
        debug_assert_eq!(b.len(), self.nrows);
        for (j, col) in self.cols.iter().enumerate() {
            if self.tau[j] == T::zero() {
                continue;
            }
            let v_tail = &col[j + 1..];
            let s = b[j] + dot(v_tail, &b[j + 1..]);
            let f = self.tau[j] * s;
            b[j] = b[j] - f;
            for (o, &v) in b[j + 1..].iter_mut().zip(v_tail) {
                *o = *o - f * v;
            }
        }
    }

    /// Solves `R x = rhs[..p]` by back substitution.
    pub fn solve_r(&self, rhs: &[T]) -> Vec<T> {
        let p = self.ncols();
        let mut x = rhs[..p].to_vec();
        for i in (0..p).rev() {
            let mut s = x[i];
            for (k, col) in self.cols.iter().enumerate().skip(i + 1) {
                s = s - col[i] * x[k];
            }
            x[i] = s / self.cols[i][i];
        }
        x
    }

    /// Least-squares solution of `A x ~ b`.
    pub fn solve_least_squares(&self, b: &[T]) -> Vec<T> {
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        self.solve_r(&qtb)
    }

    /// `(R^T R)^{-1} = (A^T A)^{-1}`, computed through `R^{-1}`.
    pub fn gram_inverse(&self) -> Array2<T> {
        let p = self.ncols();
        // R^{-1} is upper triangular; build it column by column.
        let mut rinv = Array2::<T>::zeros((p, p));
        for c in 0..p {
            for i in (0..=c).rev() {
                let mut s = if i == c { T::one() } else { T::zero() };
                for k in (i + 1)..=c {
                    s = s - self.cols[k][i] * rinv[[k, c]];
                }
                rinv[[i, c]] = s / self.cols[i][i];
            }
        }
        let mut out = Array2::<T>::zeros((p, p));
        for a in 0..p {
            for b in a..p {
                let start = b;
                let mut s = T::zero();
                for k in start..p {
                    s = s + rinv[[a, k]] * rinv[[b, k]];
                }
                out[[a, b]] = s;
                out[[b, a]] = s;
            }
        }
        out
    }
}
