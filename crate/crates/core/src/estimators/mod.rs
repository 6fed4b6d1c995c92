//! Treatment-effect estimators for two-arm trials with a time-varying
//! placebo response.
//!
//! Every method returns a [`FitResult`]: a one-sided p-value for
//! `H1: theta > 0` and, where the method has one, a point estimate with a
//! standard error and a symmetric 95% interval.

pub(crate) mod comparators;
mod huber;
mod swsr;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::linmodels::Arm;
use crate::scalar::Scalar;

pub use comparators::{
    exact_rank_sum_upper, midranks, rank_sum_test, slr_fit, welch_summary, welch_t, wilcoxon,
    wlr_fit, RankSumSummary,
};
pub use huber::{rr_fit, rr_fit_with, HuberConfig};
pub use swsr::{
    assign_folds, swsr_fit, swsr_fit_with_folds, CandidateGrid, SplineCandidate, WeightScope,
    MAX_REFOLDS,
};

/// Observed trial: response, collection time and arm for each patient.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialData<T> {
    y: Vec<T>,
    t: Vec<T>,
    arm: Vec<Arm>,
}

impl<T: Scalar> TrialData<T> {
    pub fn new(y: Vec<T>, t: Vec<T>, arm: Vec<Arm>) -> Result<Self> {
        if y.len() != t.len() || y.len() != arm.len() {
            return Err(Error::InvalidArgument(format!(
                "lengths differ: y={}, t={}, a={}",
                y.len(),
                t.len(),
                arm.len()
            )));
        }
        if y.iter().chain(&t).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite response or time".into()));
        }
        let n_t = arm.iter().filter(|a| **a == Arm::Treatment).count();
        if n_t == 0 || n_t == arm.len() {
            return Err(Error::InsufficientData("both arms must be nonempty".into()));
        }
        Ok(Self { y, t, arm })
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn t(&self) -> &[T] {
        &self.t
    }

    pub fn arm(&self) -> &[Arm] {
        &self.arm
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_arm(&self, arm: Arm) -> usize {
        self.arm.iter().filter(|a| **a == arm).count()
    }

    /// Responses of one arm, in patient order.
    pub fn responses(&self, arm: Arm) -> Vec<T> {
        self.y
            .iter()
            .zip(&self.arm)
            .filter(|(_, a)| **a == arm)
            .map(|(&y, _)| y)
            .collect()
    }

    /// Same times and arms with different responses.
    pub fn with_responses(&self, y: Vec<T>) -> Result<Self> {
        Self::new(y, self.t.clone(), self.arm.clone())
    }

    /// Relabels placebo as treatment and vice versa.
    pub fn swapped_arms(&self) -> Self {
        Self {
            y: self.y.clone(),
            t: self.t.clone(),
            arm: self.arm.iter().map(|a| a.swapped()).collect(),
        }
    }

    /// Rows reordered so that new row `i` is old row `order[i]`.
    pub fn reordered(&self, order: &[usize]) -> Self {
        Self {
            y: order.iter().map(|&i| self.y[i]).collect(),
            t: order.iter().map(|&i| self.t[i]).collect(),
            arm: order.iter().map(|&i| self.arm[i]).collect(),
        }
    }
}

/// Analysis method label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    Wtt,
    Wt,
    Slr,
    Wlr,
    Rr,
    RtT,
    RtW,
    Swsr,
    /// SWSR with the single fixed candidate `k = 1, d = 1`.
    SwsrSimple,
    /// SWSR with the single fixed candidate `k = 100, d = 3`.
    SwsrComplex,
}

impl Method {
    /// The eight methods compared in the operating-characteristic tables.
    pub const STANDARD: [Method; 8] = [
        Method::Wtt,
        Method::Wt,
        Method::Slr,
        Method::Wlr,
        Method::Rr,
        Method::RtT,
        Method::RtW,
        Method::Swsr,
    ];

    pub const ALL: [Method; 10] = [
        Method::Wtt,
        Method::Wt,
        Method::Slr,
        Method::Wlr,
        Method::Rr,
        Method::RtT,
        Method::RtW,
        Method::Swsr,
        Method::SwsrSimple,
        Method::SwsrComplex,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Wtt => "WTT",
            Method::Wt => "WT",
            Method::Slr => "SLR",
            Method::Wlr => "WLR",
            Method::Rr => "RR",
            Method::RtT => "RT(T)",
            Method::RtW => "RT(W)",
            Method::Swsr => "SWSR",
            Method::SwsrSimple => "SWSR(S)",
            Method::SwsrComplex => "SWSR(C)",
        }
    }

    /// Stable numeric id, used to key per-method random streams.
    pub fn id(self) -> u64 {
        Method::ALL.iter().position(|m| *m == self).expect("listed") as u64
    }

    /// Whether the method yields a point estimate and interval.
    pub fn estimates_effect(self) -> bool {
        !matches!(self, Method::Wt | Method::RtT | Method::RtW)
    }

    pub fn is_randomization(self) -> bool {
        matches!(self, Method::RtT | Method::RtW)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase();
        Method::ALL
            .into_iter()
            .find(|m| m.label() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

impl From<Method> for String {
    fn from(m: Method) -> Self {
        m.label().to_string()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// One row of the cross-validation table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvScore {
    pub k: usize,
    pub d: usize,
    /// Mean validation MSE; `None` when the candidate was skipped.
    pub mean_mse: Option<f64>,
}

/// Method-specific details of a fit.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Degrees of freedom of the reference t distribution.
    pub df: Option<f64>,
    /// Test statistic on the observed data.
    pub statistic: Option<f64>,
    /// Selected `(k, d)` for spline methods.
    pub selected: Option<(usize, usize)>,
    pub cv_table: Vec<CvScore>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub n_perm: Option<usize>,
    pub degenerate_permutations: Option<usize>,
    /// How the p-value was referenced: `t`, `normal`, `exact`, `permutation`.
    pub reference: Option<&'static str>,
    pub warnings: Vec<String>,
}

/// Uniform output of every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub method: Method,
    pub theta_hat: Option<T>,
    pub se: Option<T>,
    pub p_one_sided: T,
    pub ci95: Option<(T, T)>,
    pub diagnostics: Diagnostics,
}

impl<T: Scalar> FitResult<T> {
    /// Test-only result without point estimate.
    pub(crate) fn test_only(method: Method, p: T, diagnostics: Diagnostics) -> Self {
        Self {
            method,
            theta_hat: None,
            se: None,
            p_one_sided: p,
            ci95: None,
            diagnostics,
        }
    }

    /// Estimate with t-reference inference on `df` degrees of freedom.
    pub(crate) fn from_t(
        method: Method,
        theta: T,
        se: T,
        df: f64,
        mut diagnostics: Diagnostics,
    ) -> Result<Self> {
        let (p, half) = t_inference(theta.as_f64(), se.as_f64(), df)?;
        diagnostics.df = Some(df);
        diagnostics.reference.get_or_insert("t");
        if diagnostics.statistic.is_none() && se > T::zero() {
            diagnostics.statistic = Some(theta.as_f64() / se.as_f64());
        }
        let half = T::lit(half);
        Ok(Self {
            method,
            theta_hat: Some(theta),
            se: Some(se),
            p_one_sided: T::lit(p),
            ci95: Some((theta - half, theta + half)),
            diagnostics,
        })
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_one_sided.as_f64() < alpha
    }

    pub fn covers(&self, theta: f64) -> Option<bool> {
        self.ci95
            .map(|(lo, hi)| lo.as_f64() <= theta && theta <= hi.as_f64())
    }
}

/// One-sided upper p-value and 97.5% half-width multiplier times `se`.
pub(crate) fn t_inference(theta: f64, se: f64, df: f64) -> Result<(f64, f64)> {
    if !(df > 0.0) {
        return Err(Error::InsufficientData("no residual degrees of freedom".into()));
    }
    if se == 0.0 {
        let p = if theta > 0.0 {
            0.0
        } else if theta < 0.0 {
            1.0
        } else {
            0.5
        };
        return Ok((p, 0.0));
    }
    if !se.is_finite() || !theta.is_finite() {
        return Err(Error::Estimation("non-finite estimate or standard error".into()));
    }
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Estimation(format!("t distribution: {e}")))?;
    let p = dist.sf(theta / se).clamp(0.0, 1.0);
    let q = dist.inverse_cdf(0.975);
    Ok((p, q * se))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_labels_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert!("XYZ".parse::<Method>().is_err());
        assert_eq!("rt(t)".parse::<Method>().unwrap(), Method::RtT);
    }

    #[test]
    fn t_reference_values() {
        // t_{0.975, 10} = 2.228138851986...
        let (p, half) = t_inference(0.0, 1.0, 10.0).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert!((half - 2.228_138_851_986_274).abs() < 1e-8);
        let (p, _) = t_inference(2.0, 1.0, 1e6).unwrap();
        // upper normal tail at 2
        assert!((p - 0.022_750_131_948_179).abs() < 1e-6);
    }

    #[test]
    fn trial_data_validation() {
        assert!(TrialData::new(vec![1.0], vec![1.0, 2.0], vec![Arm::Placebo]).is_err());
        assert!(TrialData::new(
            vec![1.0, 2.0],
            vec![1.0, 2.0],
            vec![Arm::Placebo, Arm::Placebo]
        )
        .is_err());
        let d = TrialData::new(
            vec![1.0, 2.0, 3.0],
            vec![1.0, 2.0, 3.0],
            vec![Arm::Placebo, Arm::Treatment, Arm::Placebo],
        )
        .unwrap();
        assert_eq!(d.n_arm(Arm::Placebo), 2);
        assert_eq!(d.responses(Arm::Treatment), vec![2.0]);
        assert_eq!(d.swapped_arms().n_arm(Arm::Placebo), 1);
    }
}
