//! Re-randomization tests with fixed arm sizes.
//!
//! Responses are held fixed and the treatment labels are re-drawn uniformly
//! among all assignments with the observed number of treated patients. Each
//! permutation `b` draws from its own ChaCha stream keyed by `(seed, b)`, so
//! the p-value does not depend on evaluation order or thread count.

use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::comparators::{midranks, welch_from_sums, SubsetSums};
use crate::estimators::{Diagnostics, FitResult, Method, TrialData};
use crate::linmodels::Arm;
use crate::rng::stream;
use crate::scalar::Scalar;

/// Statistic recomputed under each re-randomization. Larger values favour
/// `theta > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandStatistic {
    /// Welch t statistic, treatment minus placebo.
    WelchT,
    /// Sum of treatment-arm midranks.
    RankSum,
}

impl RandStatistic {
    pub fn method(self) -> Method {
        match self {
            RandStatistic::WelchT => Method::RtT,
            RandStatistic::RankSum => Method::RtW,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AllocationScheme {
    /// Uniform over assignments with exactly the observed arm sizes.
    #[default]
    FixedMargins,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermutationPlan {
    pub n_perm: usize,
    pub scheme: AllocationScheme,
    pub seed: u64,
}

impl PermutationPlan {
    pub fn new(n_perm: usize, seed: u64) -> Self {
        Self {
            n_perm,
            scheme: AllocationScheme::FixedMargins,
            seed,
        }
    }
}

/// Default number of re-randomizations for a single analysis.
pub const DEFAULT_N_PERM: usize = 10_000;

/// Sorted indices of the patients drawn into the smaller arm-sized subset
/// for permutation `b`.
fn draw_subset(n: usize, m: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = stream(seed, b as u64);
    let mut mask = vec![false; n];
    for i in index::sample(&mut rng, n, m) {
        mask[i] = true;
    }
    let picked: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
    debug_assert_eq!(picked.len(), m);
    picked
}

/// The assignment vector of permutation `b` under `plan`, for inspection and tests.
pub fn permuted_assignment(n: usize, n_treated: usize, plan: &PermutationPlan, b: usize) -> Vec<Arm> {
    let m = n_treated.min(n - n_treated);
    let subset_is_treated = n_treated <= n - n_treated;
    let picked = draw_subset(n, m, plan.seed, b);
    let (inside, outside) = if subset_is_treated {
        (Arm::Treatment, Arm::Placebo)
    } else {
        (Arm::Placebo, Arm::Treatment)
    };
    let mut arm = vec![outside; n];
    for i in picked {
        arm[i] = inside;
    }
    debug_assert_eq!(arm.iter().filter(|a| **a == Arm::Treatment).count(), n_treated);
    arm
}

struct Scorer {
    values: Vec<f64>,
    statistic: RandStatistic,
    total: SubsetSums,
    n: usize,
    n_treated: usize,
}

impl Scorer {
    fn new<T: Scalar>(data: &TrialData<T>, statistic: RandStatistic) -> Self {
        let values = match statistic {
            RandStatistic::WelchT => {
                let y: Vec<f64> = data.y().iter().map(|v| v.as_f64()).collect();
                // centring keeps the subset sums of squares well conditioned
                let mean = y.iter().sum::<f64>() / y.len() as f64;
                y.into_iter().map(|v| v - mean).collect()
            }
            RandStatistic::RankSum => midranks(data.y()),
        };
        let all: Vec<usize> = (0..values.len()).collect();
        let total = SubsetSums::of(&values, &all);
        Self {
            n: values.len(),
            n_treated: data.n_arm(Arm::Treatment),
            values,
            statistic,
            total,
        }
    }

    /// Statistic when `subset` (sorted) is the smaller-or-equal arm. Returns
    /// `None` when it is undefined (zero Welch variance).
    fn score(&self, subset: &[usize]) -> Option<f64> {
        let sel = SubsetSums::of(&self.values, subset);
        let rest = self.total.minus(&sel);
        let subset_is_treated = self.n_treated <= self.n - self.n_treated;
        let (treated, control) = if subset_is_treated { (sel, rest) } else { (rest, sel) };
        match self.statistic {
            RandStatistic::RankSum => Some(treated.sum),
            RandStatistic::WelchT => welch_from_sums(&treated, &control),
        }
    }

    fn observed_subset(&self, arm: &[Arm]) -> Vec<usize> {
        let want = if self.n_treated <= self.n - self.n_treated {
            Arm::Treatment
        } else {
            Arm::Placebo
        };
        (0..self.n).filter(|&i| arm[i] == want).collect()
    }
}

/// One-sided randomization test with the add-one p-value
/// `(1 + #{b : S_b >= S_0}) / (1 + n_perm)`.
pub fn rand_test<T: Scalar>(
    data: &TrialData<T>,
    statistic: RandStatistic,
    plan: &PermutationPlan,
) -> Result<FitResult<T>> {
    if plan.n_perm == 0 {
        return Err(Error::InvalidArgument("n_perm must be at least 1".into()));
    }
    if plan.n_perm < 99 {
        log::warn!("only {} re-randomizations; p-value resolution is coarse", plan.n_perm);
    }
    let scorer = Scorer::new(data, statistic);
    let m = scorer.n_treated.min(scorer.n - scorer.n_treated);
    let observed_subset = scorer.observed_subset(data.arm());
    let (s0, s0_degenerate) = match scorer.score(&observed_subset) {
        Some(s) => (s, false),
        None => (0.0, true),
    };

    let (exceed, degenerate) = (0..plan.n_perm)
        .into_par_iter()
        .map(|b| {
            let subset = draw_subset(scorer.n, m, plan.seed, b);
            match scorer.score(&subset) {
                Some(s) => ((s >= s0) as usize, 0usize),
                None => ((0.0 >= s0) as usize, 1usize),
            }
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    let p = (1 + exceed) as f64 / (1 + plan.n_perm) as f64;
    let mut diagnostics = Diagnostics {
        statistic: Some(s0),
        n_perm: Some(plan.n_perm),
        degenerate_permutations: Some(degenerate),
        reference: Some("permutation"),
        ..Diagnostics::default()
    };
    if s0_degenerate {
        diagnostics
            .warnings
            .push("observed Welch statistic undefined (zero variance); set to 0".into());
    }
    Ok(FitResult::test_only(statistic.method(), T::lit(p), diagnostics))
}
