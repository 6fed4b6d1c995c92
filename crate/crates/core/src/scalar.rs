//! Floating-point abstraction shared by the basis, linear-algebra and
//! regression layers.
//!
//! Everything numerical in this crate is written against [`Scalar`] so the
//! same code runs in `f32` and `f64`. The simulation layer fixes `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar usable throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Lossy conversion to `f64` for distribution functions and reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Linear-interpolation sample quantile (order statistics `x[(n-1)p]`
/// interpolated between neighbours). `sorted` must be ascending.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: T) -> T {
    let n = sorted.len();
    debug_assert!(n > 0);
    if n == 1 {
        return sorted[0];
    }
    let h = p * T::from_usize_lossy(n - 1);
    let lo = h.floor();
    let i = lo.to_usize().unwrap_or(0).min(n - 1);
    if i + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo;
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

/// Median of an unsorted slice (average of the two middle values for even length).
pub fn median<T: Scalar>(values: &[T]) -> T {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("median of NaN"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::lit(2.0)
    }
}
