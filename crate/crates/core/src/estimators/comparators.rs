use statrs::distribution::{ContinuousCDF, Normal};

use super::{Diagnostics, FitResult, Method, TrialData};
use crate::error::{Error, Result};
use crate::linmodels::{group_weights, ols_fit, wls_fit, Arm, DesignSpec};
use crate::scalar::Scalar;

/// Arm size below which the rank-sum p-value is computed exactly (when
/// there are no ties).
pub const EXACT_RANK_SUM_LIMIT: usize = 50;

fn mean_var<T: Scalar>(v: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(v.len());
    let mean = v.iter().copied().sum::<T>() / n;
    let ss = v.iter().fold(T::zero(), |acc, &x| acc + (x - mean) * (x - mean));
    (mean, ss / (n - T::one()))
}

/// Difference of arm means with the Welch standard error and
/// Welch–Satterthwaite degrees of freedom.
pub fn welch_summary<T: Scalar>(treated: &[T], control: &[T]) -> Result<(T, T, f64)> {
    if treated.len() < 2 || control.len() < 2 {
        return Err(Error::InsufficientData(
            "Welch test needs at least two observations per arm".into(),
        ));
    }
    let (mt, vt) = mean_var(treated);
    let (mc, vc) = mean_var(control);
    let at = vt / T::from_usize_lossy(treated.len());
    let ac = vc / T::from_usize_lossy(control.len());
    let se2 = at + ac;
    if se2 <= T::zero() {
        return Err(Error::DegenerateVariance(
            "both arms have zero sample variance".into(),
        ));
    }
    let (at, ac, se2) = (at.as_f64(), ac.as_f64(), se2.as_f64());
    let df = se2 * se2
        / (at * at / (treated.len() - 1) as f64 + ac * ac / (control.len() - 1) as f64);
    Ok((mt - mc, T::lit(se2.sqrt()), df))
}

/// Welch's unequal-variance t test.
pub fn welch_t<T: Scalar>(data: &TrialData<T>) -> Result<FitResult<T>> {
    let treated = data.responses(Arm::Treatment);
    let control = data.responses(Arm::Placebo);
    let (diff, se, df) = welch_summary(&treated, &control)?;
    FitResult::from_t(Method::Wtt, diff, se, df, Diagnostics::default())
}

/// Count, sum and sum of squares over a subset of values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SubsetSums {
    pub n: usize,
    pub sum: f64,
    pub sumsq: f64,
}

impl SubsetSums {
    pub fn of(values: &[f64], subset: &[usize]) -> Self {
        let (sum, sumsq) = subset
            .iter()
            .fold((0.0, 0.0), |(s, q), &i| (s + values[i], q + values[i] * values[i]));
        Self {
            n: subset.len(),
            sum,
            sumsq,
        }
    }

    pub fn minus(&self, other: &Self) -> Self {
        Self {
            n: self.n - other.n,
            sum: self.sum - other.sum,
            sumsq: self.sumsq - other.sumsq,
        }
    }

    fn mean_var(&self) -> (f64, f64) {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = ((self.sumsq - self.sum * mean) / (n - 1.0)).max(0.0);
        (mean, var)
    }
}

/// Welch t statistic from arm sums; `None` when undefined.
pub(crate) fn welch_from_sums(treated: &SubsetSums, control: &SubsetSums) -> Option<f64> {
    if treated.n < 2 || control.n < 2 {
        return None;
    }
    let (mt, vt) = treated.mean_var();
    let (mc, vc) = control.mean_var();
    let se2 = vt / treated.n as f64 + vc / control.n as f64;
    if !(se2 > 0.0) {
        return None;
    }
    Some((mt - mc) / se2.sqrt())
}

/// Midranks (1-based) of `values`, averaging over ties.
pub fn midranks<T: Scalar>(values: &[T]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j share the average of ranks i+1..=j
        let r = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = r;
        }
        i = j;
    }
    ranks
}

/// Tie sizes of a sample.
fn tie_groups<T: Scalar>(values: &[T]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut out = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i + 1;
        while j < v.len() && v[j] == v[i] {
            j += 1;
        }
        out.push(j - i);
        i = j;
    }
    out
}

/// Upper tail `P(W >= w)` of the rank sum of `m` items drawn from ranks
/// `1..=n` without ties.
pub fn exact_rank_sum_upper(n: usize, m: usize, w: f64) -> f64 {
    let max_sum = m * (2 * n - m + 1) / 2;
    // counts[j][s]: subsets of size j of the ranks seen so far with sum s
    let mut counts = vec![vec![0.0f64; max_sum + 1]; m + 1];
    counts[0][0] = 1.0;
    for r in 1..=n {
        for j in (1..=m.min(r)).rev() {
            let (lower, upper) = counts.split_at_mut(j);
            let prev = &lower[j - 1];
            let cur = &mut upper[0];
            for s in (r..=max_sum).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let total: f64 = counts[m].iter().sum();
    let threshold = w.ceil().max(0.0) as usize;
    let upper: f64 = counts[m].iter().skip(threshold).sum();
    (upper / total).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSumSummary {
    /// Sum of treatment-arm midranks.
    pub statistic: f64,
    pub p_one_sided: f64,
    pub exact: bool,
}

/// One-sided rank-sum test of treatment > placebo.
pub fn rank_sum_test<T: Scalar>(y: &[T], arm: &[Arm]) -> RankSumSummary {
    let n = y.len();
    let ranks = midranks(y);
    let m = arm.iter().filter(|a| **a == Arm::Treatment).count();
    let n_p = n - m;
    let w: f64 = ranks
        .iter()
        .zip(arm)
        .filter(|(_, a)| **a == Arm::Treatment)
        .map(|(r, _)| r)
        .sum();
    let ties = tie_groups(y);
    let has_ties = ties.iter().any(|&g| g > 1);
    if !has_ties && m < EXACT_RANK_SUM_LIMIT && n_p < EXACT_RANK_SUM_LIMIT {
        return RankSumSummary {
            statistic: w,
            p_one_sided: exact_rank_sum_upper(n, m, w),
            exact: true,
        };
    }
    let (nf, mf, npf) = (n as f64, m as f64, n_p as f64);
    let expected = mf * (nf + 1.0) / 2.0;
    let tie_term: f64 = ties
        .iter()
        .map(|&g| {
            let g = g as f64;
            g * g * g - g
        })
        .sum::<f64>()
        / (nf * (nf - 1.0));
    let var = mf * npf / 12.0 * ((nf + 1.0) - tie_term);
    if !(var > 0.0) {
        return RankSumSummary {
            statistic: w,
            p_one_sided: 1.0,
            exact: false,
        };
    }
    let dev = w - expected;
    // continuity correction shrinks the deviation toward zero, never past it
    let corrected = dev.signum() * (dev.abs() - 0.5).max(0.0);
    let z = corrected / var.sqrt();
    let p = Normal::standard().sf(z);
    RankSumSummary {
        statistic: w,
        p_one_sided: p,
        exact: false,
    }
}

/// Wilcoxon rank-sum (Mann–Whitney) test. Test only: no point estimate.
pub fn wilcoxon<T: Scalar>(data: &TrialData<T>) -> Result<FitResult<T>> {
    let s = rank_sum_test(data.y(), data.arm());
    let diagnostics = Diagnostics {
        statistic: Some(s.statistic),
        reference: Some(if s.exact { "exact" } else { "normal" }),
        ..Diagnostics::default()
    };
    Ok(FitResult::test_only(
        Method::Wt,
        T::lit(s.p_one_sided),
        diagnostics,
    ))
}

fn treatment_inference<T: Scalar>(
    method: Method,
    design: &DesignSpec<T>,
    fit: &crate::linmodels::LinearFit<T>,
    diagnostics: Diagnostics,
) -> Result<FitResult<T>> {
    let col = design
        .treatment_col()
        .ok_or_else(|| Error::InvalidArgument("design has no treatment column".into()))?;
    FitResult::from_t(
        method,
        fit.coefficients[col],
        fit.se(col),
        fit.dof as f64,
        diagnostics,
    )
}

/// Least squares on `[1, t, a]`.
pub fn slr_fit<T: Scalar>(data: &TrialData<T>) -> Result<FitResult<T>> {
    let design = DesignSpec::linear_time(data.t(), data.arm())?;
    let fit = ols_fit(&design, data.y())?;
    treatment_inference(Method::Slr, &design, &fit, Diagnostics::default())
}

/// Least squares on `[1, t, a]` reweighted by the inverse per-arm residual
/// variance of the unweighted fit.
pub fn wlr_fit<T: Scalar>(data: &TrialData<T>) -> Result<FitResult<T>> {
    let design = DesignSpec::linear_time(data.t(), data.arm())?;
    let ols = ols_fit(&design, data.y())?;
    let w = group_weights(&ols.residuals, data.arm())?;
    let fit = wls_fit(&design, data.y(), &w)?;
    treatment_inference(Method::Wlr, &design, &fit, Diagnostics::default())
}
