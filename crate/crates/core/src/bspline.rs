//! Clamped B-spline bases on quantile knots.
//!
//! Knot vectors are padded with `d + 1` copies of each boundary, so a basis of
//! degree `d` with `k` interior knots has `k + d + 1` functions that sum to one
//! everywhere on `[lo, hi]`. Evaluation uses the triangular form of the
//! Cox–de Boor recursion restricted to the `d + 1` functions that are nonzero
//! on the knot span containing `t`.
//!
//! Intervals are half-open `[u_i, u_{i+1})` except the last, which is closed so
//! that `t = hi` still belongs to the domain.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::{quantile_sorted, Scalar};

/// Padded knot sequence for a clamped B-spline basis.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector<T> {
    interior: Vec<T>,
    lo: T,
    hi: T,
    degree: usize,
    full: Vec<T>,
    requested_interior: usize,
}

impl<T: Scalar> KnotVector<T> {
    /// Builds a knot vector from explicit interior knots. Interior knots must be
    /// strictly increasing and lie strictly inside `(lo, hi)`.
    pub fn new(interior: Vec<T>, lo: T, hi: T, degree: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::DegenerateDomain);
        }
        if interior.iter().any(|&u| !(u > lo && u < hi)) {
            return Err(Error::InvalidArgument(
                "interior knots must lie strictly inside the boundary knots".into(),
            ));
        }
        if interior.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "interior knots must be strictly increasing".into(),
            ));
        }
        let requested_interior = interior.len();
        Ok(Self::assemble(interior, lo, hi, degree, requested_interior))
    }

    fn assemble(interior: Vec<T>, lo: T, hi: T, degree: usize, requested_interior: usize) -> Self {
        let mut full = Vec::with_capacity(interior.len() + 2 * (degree + 1));
        full.extend(std::iter::repeat_n(lo, degree + 1));
        full.extend_from_slice(&interior);
        full.extend(std::iter::repeat_n(hi, degree + 1));
        Self {
            interior,
            lo,
            hi,
            degree,
            full,
            requested_interior,
        }
    }

    pub fn interior(&self) -> &[T] {
        &self.interior
    }

    pub fn boundary_lo(&self) -> T {
        self.lo
    }

    pub fn boundary_hi(&self) -> T {
        self.hi
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// The padded, nondecreasing knot sequence.
    pub fn full(&self) -> &[T] {
        &self.full
    }

    /// Effective number of interior knots after tie collapsing.
    pub fn k(&self) -> usize {
        self.interior.len()
    }

    /// Number of interior knots that was asked for before tie collapsing.
    pub fn requested_k(&self) -> usize {
        self.requested_interior
    }

    /// `k + d + 1`.
    pub fn n_basis(&self) -> usize {
        self.interior.len() + self.degree + 1
    }

    pub fn contains(&self, t: T) -> bool {
        t >= self.lo && t <= self.hi
    }

    /// Index `mu` (0-based, into `full`) of the knot span holding `t`, with
    /// `full[mu] <= t < full[mu + 1]` and the right boundary folded into the
    /// last nonempty span.
    pub fn find_span(&self, t: T) -> Result<usize> {
        if !self.contains(t) {
            return Err(Error::OutsideDomain {
                t: t.as_f64(),
                lo: self.lo.as_f64(),
                hi: self.hi.as_f64(),
            });
        }
        let last = self.n_basis() - 1;
        if t == self.hi {
            return Ok(last);
        }
        let idx = self.full.partition_point(|&u| u <= t) - 1;
        Ok(idx.clamp(self.degree, last))
    }

    /// The `d + 1` basis values that can be nonzero at `t`, together with the
    /// span index `mu`; entry `r` is `B_{mu - d + r}(t)` (0-based basis index).
    pub fn nonzero_basis(&self, t: T) -> Result<(usize, Vec<T>)> {
        let mu = self.find_span(t)?;
        let d = self.degree;
        let u = &self.full;
        let mut n = vec![T::zero(); d + 1];
        let mut left = vec![T::zero(); d + 1];
        let mut right = vec![T::zero(); d + 1];
        n[0] = T::one();
        for j in 1..=d {
            left[j] = t - u[mu + 1 - j];
            right[j] = u[mu + j] - t;
            let mut saved = T::zero();
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                // 0/0 terms of the recursion are taken as zero.
                let temp = if denom == T::zero() { T::zero() } else { n[r] / denom };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        Ok((mu, n))
    }
}

/// Places `k` interior knots at the `j/(k+1)` sample quantiles of `times`
/// (linear interpolation between order statistics) and clamps the boundaries
/// at the observed minimum and maximum.
///
/// Tied quantiles are collapsed to unique values, which lowers the effective
/// `k`; a warning is logged when that happens.
pub fn make_knot_vector<T: Scalar>(times: &[T], k: usize, d: usize) -> Result<KnotVector<T>> {
    if times.is_empty() {
        return Err(Error::DegenerateDomain);
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("time values must be finite".into()));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    if lo == hi {
        return Err(Error::DegenerateDomain);
    }

    let denom = T::from_usize_lossy(k + 1);
    let mut interior: Vec<T> = Vec::with_capacity(k);
    for j in 1..=k {
        let q = quantile_sorted(&sorted, T::from_usize_lossy(j) / denom);
        if q > lo && q < hi && interior.last().is_none_or(|&prev| q > prev) {
            interior.push(q);
        }
    }
    if interior.len() < k {
        log::warn!(
            "tied time quantiles: {} of {} interior knots kept",
            interior.len(),
            k
        );
    }
    Ok(KnotVector::assemble(interior, lo, hi, d, k))
}

/// `B^d_j(t)` for the 1-based basis index `j`.
pub fn basis_value<T: Scalar>(knots: &KnotVector<T>, j: usize, t: T) -> Result<T> {
    let count = knots.n_basis();
    if j == 0 || j > count {
        return Err(Error::IndexOutOfRange { index: j, count });
    }
    let (mu, values) = knots.nonzero_basis(t)?;
    let first = mu - knots.degree();
    let idx = j - 1;
    if idx >= first && idx <= mu {
        Ok(values[idx - first])
    } else {
        Ok(T::zero())
    }
}

/// Basis evaluations at a set of time points, one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix<T> {
    values: Array2<T>,
    times: Vec<T>,
}

impl<T: Scalar> BasisMatrix<T> {
    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn n_basis(&self) -> usize {
        self.values.ncols()
    }

    pub fn into_values(self) -> Array2<T> {
        self.values
    }
}

pub fn design_matrix<T: Scalar>(times: &[T], knots: &KnotVector<T>) -> Result<BasisMatrix<T>> {
    let p = knots.n_basis();
    let d = knots.degree();
    let mut values = Array2::<T>::zeros((times.len(), p));
    for (i, &t) in times.iter().enumerate() {
        let (mu, local) = knots.nonzero_basis(t)?;
        for (r, v) in local.into_iter().enumerate() {
            values[[i, mu - d + r]] = v;
        }
    }
    Ok(BasisMatrix {
        values,
        times: times.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Direct Cox–de Boor recursion over the full padded sequence, used as an
    /// oracle independent of the span-local triangular evaluation.
    fn cox_de_boor(full: &[f64], i: usize, d: usize, t: f64, n_basis: usize) -> f64 {
        if d == 0 {
            // interval n_basis - 1 is the last nonempty one; it is closed on the right.
            let inside = full[i] <= t && t < full[i + 1];
            let right_end = i == n_basis - 1 && t == full[i + 1];
            return if inside || right_end { 1.0 } else { 0.0 };
        }
        let mut acc = 0.0;
        let den1 = full[i + d] - full[i];
        if den1 != 0.0 {
            acc += (t - full[i]) / den1 * cox_de_boor(full, i, d - 1, t, n_basis);
        }
        let den2 = full[i + d + 1] - full[i + 1];
        if den2 != 0.0 {
            acc += (full[i + d + 1] - t) / den2 * cox_de_boor(full, i + 1, d - 1, t, n_basis);
        }
        acc
    }

    fn seq(n: usize) -> Vec<f64> {
        (1..=n).map(|i| i as f64).collect()
    }

    #[test]
    fn median_knot_for_k1() {
        let kv = make_knot_vector(&seq(600), 1, 1).unwrap();
        assert_eq!(kv.interior(), &[300.5]);
        assert_eq!(kv.boundary_lo(), 1.0);
        assert_eq!(kv.boundary_hi(), 600.0);
        assert_eq!(kv.full(), &[1.0, 1.0, 300.5, 600.0, 600.0]);
        assert_eq!(kv.n_basis(), 3);
    }

    #[test]
    fn sextile_knots_for_k5() {
        let xs = seq(600);
        let kv = make_knot_vector(&xs, 5, 3).unwrap();
        let expected: Vec<f64> = (1..=5)
            .map(|j| 1.0 + 599.0 * j as f64 / 6.0)
            .collect();
        for (a, b) in kv.interior().iter().zip(&expected) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
        }
        assert_eq!(kv.full().len(), 5 + 2 * 4);
        assert_eq!(kv.n_basis(), 9);
    }

    #[test]
    fn degree_zero_no_interior() {
        let kv = make_knot_vector(&[0.0, 1.0], 0, 0).unwrap();
        assert_eq!(kv.full(), &[0.0, 1.0]);
        assert_eq!(kv.n_basis(), 1);
        assert_eq!(basis_value(&kv, 1, 0.5).unwrap(), 1.0);
        assert_eq!(basis_value(&kv, 1, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_domain_rejected() {
        assert!(matches!(
            make_knot_vector(&[2.0, 2.0, 2.0], 1, 1),
            Err(Error::DegenerateDomain)
        ));
        assert!(matches!(
            make_knot_vector::<f64>(&[], 1, 1),
            Err(Error::DegenerateDomain)
        ));
    }

    #[test]
    fn tied_quantiles_collapse() {
        let mut times = vec![0.0; 50];
        times.extend(vec![1.0; 50]);
        times.push(2.0);
        // every interior quantile lands on 0 or 1; only 1 is strictly inside.
        let kv = make_knot_vector(&times, 4, 2).unwrap();
        assert_eq!(kv.interior(), &[1.0]);
        assert_eq!(kv.requested_k(), 4);
        assert_eq!(kv.n_basis(), 1 + 2 + 1);
    }

    #[test]
    fn cubic_cardinal_center_value() {
        // Uniform knots 0..=8 with clamped ends: the basis whose support is
        // [2, 6] is the cardinal cubic, equal to 2/3 at its centre.
        let kv = KnotVector::new((1..8).map(f64::from).collect(), 0.0, 8.0, 3).unwrap();
        // support of 0-based basis i is [full[i], full[i+4]); full = [0,0,0,0,1,2,...]
        // 0-based index 5 -> [full[5], full[9]] = [2, 6].
        assert_abs_diff_eq!(basis_value(&kv, 6, 4.0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(basis_value(&kv, 6, 3.0).unwrap(), 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn index_and_domain_errors() {
        let kv = make_knot_vector(&seq(10), 2, 2).unwrap();
        assert!(matches!(
            basis_value(&kv, 0, 5.0),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            basis_value(&kv, 6, 5.0),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            basis_value(&kv, 1, 10.5),
            Err(Error::OutsideDomain { .. })
        ));
        assert!(matches!(
            design_matrix(&[0.0], &kv),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn left_boundary_row_is_first_unit_vector() {
        for (k, d) in [(0, 0), (1, 1), (3, 2), (5, 3)] {
            let kv = make_knot_vector(&seq(50), k, d).unwrap();
            let bm = design_matrix(&[1.0], &kv).unwrap();
            let row = bm.values().row(0).to_vec();
            assert_abs_diff_eq!(row[0], 1.0, epsilon = 1e-14);
            assert!(row[1..].iter().all(|&v| v.abs() < 1e-14));
            let bm = design_matrix(&[50.0], &kv).unwrap();
            let row = bm.values().row(0).to_vec();
            assert_abs_diff_eq!(*row.last().unwrap(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn figure_one_basis_shape() {
        let times: Vec<f64> = (0..300).map(|i| i as f64 / 299.0).collect();
        let kv = make_knot_vector(&times, 16, 3).unwrap();
        let bm = design_matrix(&times, &kv).unwrap();
        assert_eq!(bm.values().dim(), (300, 20));
    }

    #[test]
    fn identical_times_identical_rows() {
        let kv = make_knot_vector(&seq(30), 3, 3).unwrap();
        let bm = design_matrix(&[7.3, 7.3], &kv).unwrap();
        assert_eq!(bm.values().row(0), bm.values().row(1));
    }

    #[test]
    fn agrees_with_direct_recursion() {
        let xs = [0.0, 0.3, 0.35, 0.9, 1.7, 2.2, 3.0];
        for k in 0..4 {
            for d in 0..4 {
                let kv = make_knot_vector(&xs, k, d).unwrap();
                let n = kv.n_basis();
                for step in 0..=300 {
                    let t = 3.0 * step as f64 / 300.0;
                    for j in 0..n {
                        let want = cox_de_boor(kv.full(), j, d, t, n);
                        let got = basis_value(&kv, j + 1, t).unwrap();
                        assert_abs_diff_eq!(got, want, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    /// Closed-form uniform B-splines for degrees 0..=2 on integer knots,
    /// piecewise polynomials written out by hand.
    fn cardinal(d: usize, x: f64) -> f64 {
        match d {
            0 => (0.0..1.0).contains(&x) as u8 as f64,
            1 => {
                if (0.0..1.0).contains(&x) {
                    x
                } else if (1.0..2.0).contains(&x) {
                    2.0 - x
                } else {
                    0.0
                }
            }
            2 => {
                if (0.0..1.0).contains(&x) {
                    x * x / 2.0
                } else if (1.0..2.0).contains(&x) {
                    (-2.0 * x * x + 6.0 * x - 3.0) / 2.0
                } else if (2.0..3.0).contains(&x) {
                    (3.0 - x) * (3.0 - x) / 2.0
                } else {
                    0.0
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn interior_bases_match_closed_form() {
        let kv = KnotVector::new((1..10).map(f64::from).collect(), 0.0, 10.0, 0).unwrap();
        for d in 0..=2usize {
            let kv = KnotVector::new(kv.interior().to_vec(), 0.0, 10.0, d).unwrap();
            // 0-based basis i has support [full[i], full[i+d+1]); away from the
            // clamped ends full[i] = i - d.
            for i in d..(kv.n_basis() - d) {
                let start = kv.full()[i];
                for step in 0..1000 {
                    let t = 10.0 * step as f64 / 1000.0;
                    let got = basis_value(&kv, i + 1, t).unwrap();
                    assert_abs_diff_eq!(got, cardinal(d, t - start), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn degree_zero_tiles() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64).sqrt()).collect();
        let kv = make_knot_vector(&xs, 6, 0).unwrap();
        for step in 1..2000 {
            let t = xs[39] * step as f64 / 2000.0;
            if kv.interior().contains(&t) {
                continue;
            }
            let vals: Vec<f64> = (1..=kv.n_basis())
                .map(|j| basis_value(&kv, j, t).unwrap())
                .collect();
            assert_eq!(vals.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(vals.iter().filter(|&&v| v == 0.0).count(), vals.len() - 1);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let xs: Vec<f32> = (0..100).map(|i| i as f32).collect();
        let kv = make_knot_vector(&xs, 5, 3).unwrap();
        let bm = design_matrix(&xs, &kv).unwrap();
        for row in bm.values().rows() {
            assert!((row.sum() - 1.0).abs() < 1e-5);
        }
    }
}
