//! Semiparametric weighted spline regression.
//!
//! The placebo trajectory `f(t)` is represented by a clamped B-spline basis
//! and the treatment effect by a single indicator column. For every candidate
//! `(k, d)` the working model is fitted unweighted on all patients, per-arm
//! inverse-variance weights are formed from its residuals, and the weighted
//! model is scored by 5-fold cross-validated prediction error. The winning
//! candidate is refitted on all patients with its weights; the treatment
//! coefficient and its model-based standard error give the test and interval.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{CvScore, Diagnostics, FitResult, Method, TrialData};
use crate::bspline::{design_matrix, make_knot_vector};
use crate::error::{Error, Result};
use crate::linmodels::{group_weights, ols_fit, wls_fit, Arm, DesignSpec};
use crate::scalar::Scalar;

/// Uniform fold draws attempted before falling back to arm-stratified folds.
pub const MAX_REFOLDS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SplineCandidate {
    pub k: usize,
    pub d: usize,
}

/// Where the per-arm weights used inside cross-validation come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightScope {
    /// One unweighted fit on all patients per candidate; weights reused in every fold.
    #[default]
    FullData,
    /// Unweighted fit and weights recomputed on each training fold.
    PerFold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGrid {
    pub candidates: Vec<SplineCandidate>,
    pub folds: usize,
    pub weight_scope: WeightScope,
}

impl Default for CandidateGrid {
    fn default() -> Self {
        Self::new(&[(1, 1), (1, 2), (5, 2), (5, 3)])
    }
}

impl CandidateGrid {
    pub fn new(pairs: &[(usize, usize)]) -> Self {
        Self {
            candidates: pairs.iter().map(|&(k, d)| SplineCandidate { k, d }).collect(),
            folds: 5,
            weight_scope: WeightScope::FullData,
        }
    }

    /// A single candidate: no cross-validation is run.
    pub fn fixed(k: usize, d: usize) -> Self {
        Self::new(&[(k, d)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::InvalidArgument("candidate grid is empty".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidArgument("at least two folds are required".into()));
        }
        Ok(())
    }
}

fn training_sets_have_both_arms(folds: &[usize], arm: &[Arm], n_folds: usize) -> bool {
    (0..n_folds).all(|f| {
        let mut seen = [false; 2];
        for (fi, a) in folds.iter().zip(arm) {
            if *fi != f {
                seen[*a as usize] = true;
            }
        }
        seen[0] && seen[1]
    })
}

/// Random partition of patients into `n_folds` near-equal folds.
///
/// A uniform partition is redrawn up to [`MAX_REFOLDS`] times if some
/// training set would miss an arm; after that each arm is dealt round-robin
/// across folds.
pub fn assign_folds<R: Rng + ?Sized>(arm: &[Arm], n_folds: usize, rng: &mut R) -> Result<Vec<usize>> {
    let n = arm.len();
    if n < n_folds {
        return Err(Error::InsufficientData(format!(
            "{n} patients for {n_folds} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut folds = vec![0usize; n];
    for _ in 0..MAX_REFOLDS {
        order.shuffle(rng);
        for (pos, &i) in order.iter().enumerate() {
            folds[i] = pos % n_folds;
        }
        if training_sets_have_both_arms(&folds, arm, n_folds) {
            return Ok(folds);
        }
    }
    log::warn!("falling back to arm-stratified folds");
    let mut next = 0usize;
    for group in [Arm::Placebo, Arm::Treatment] {
        let mut members: Vec<usize> = (0..n).filter(|&i| arm[i] == group).collect();
        members.shuffle(rng);
        for i in members {
            folds[i] = next % n_folds;
            next += 1;
        }
    }
    Ok(folds)
}

/// Weights with a unit fallback when residuals vanish in some arm.
fn weights_or_unit<T: Scalar>(
    residuals: &[T],
    arm: &[Arm],
    warnings: &mut Vec<String>,
) -> Result<Vec<T>> {
    match group_weights(residuals, arm) {
        Ok(w) => Ok(w.weights().to_vec()),
        Err(Error::DegenerateResiduals { group }) => {
            warnings.push(format!("zero residuals in {group} arm; unit weights used"));
            Ok(vec![T::one(); arm.len()])
        }
        Err(e) => Err(e),
    }
}

struct Prepared<T> {
    design: DesignSpec<T>,
    weights: Vec<T>,
}

fn prepare<T: Scalar>(
    data: &TrialData<T>,
    c: SplineCandidate,
    warnings: &mut Vec<String>,
) -> Result<Prepared<T>> {
    // knots depend on the full data's times only, so validation times never
    // fall outside the basis domain
    let knots = make_knot_vector(data.t(), c.k, c.d)?;
    let basis = design_matrix(data.t(), &knots)?;
    let design = DesignSpec::spline_with_treatment(basis.values(), data.arm())?;
    let ols = ols_fit(&design, data.y())?;
    let weights = weights_or_unit(&ols.residuals, data.arm(), warnings)?;
    Ok(Prepared { design, weights })
}

fn cv_score<T: Scalar>(
    data: &TrialData<T>,
    prep: &Prepared<T>,
    folds: &[usize],
    n_folds: usize,
    scope: WeightScope,
    warnings: &mut Vec<String>,
) -> Result<f64> {
    let mut total = 0.0;
    for f in 0..n_folds {
        let train: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] != f).collect();
        let valid: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] == f).collect();
        let x_train = prep.design.select_rows(&train)?;
        let y_train: Vec<T> = train.iter().map(|&i| data.y()[i]).collect();
        let w_train: Vec<T> = match scope {
            WeightScope::FullData => train.iter().map(|&i| prep.weights[i]).collect(),
            WeightScope::PerFold => {
                let ols = ols_fit(&x_train, &y_train)?;
                let arm_train: Vec<Arm> = train.iter().map(|&i| data.arm()[i]).collect();
                weights_or_unit(&ols.residuals, &arm_train, warnings)?
            }
        };
        let fit = wls_fit(&x_train, &y_train, &w_train[..])?;
        let x = prep.design.matrix();
        let mut sse = 0.0;
        for &i in &valid {
            let pred = x
                .row(i)
                .iter()
                .zip(&fit.coefficients)
                .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
            let e = (data.y()[i] - pred).as_f64();
            sse += e * e;
        }
        total += sse / valid.len() as f64;
    }
    Ok(total / n_folds as f64)
}

fn method_for(grid: &CandidateGrid) -> Method {
    match grid.candidates.as_slice() {
        [SplineCandidate { k: 1, d: 1 }] => Method::SwsrSimple,
        [SplineCandidate { k: 100, d: 3 }] => Method::SwsrComplex,
        _ => Method::Swsr,
    }
}

/// Full procedure with folds drawn from `rng`.
pub fn swsr_fit<T: Scalar, R: Rng + ?Sized>(
    data: &TrialData<T>,
    grid: &CandidateGrid,
    rng: &mut R,
) -> Result<FitResult<T>> {
    grid.validate()?;
    let folds = if grid.candidates.len() > 1 {
        assign_folds(data.arm(), grid.folds, rng)?
    } else {
        Vec::new()
    };
    swsr_fit_with_folds(data, grid, &folds)
}

/// Full procedure with a given fold assignment (`folds[i]` in `0..grid.folds`).
/// The assignment is ignored when the grid has a single candidate.
pub fn swsr_fit_with_folds<T: Scalar>(
    data: &TrialData<T>,
    grid: &CandidateGrid,
    folds: &[usize],
) -> Result<FitResult<T>> {
    grid.validate()?;
    let mut diagnostics = Diagnostics::default();
    let mut warnings = Vec::new();
    let single = grid.candidates.len() == 1;
    if !single {
        if folds.len() != data.len() || folds.iter().any(|&f| f >= grid.folds) {
            return Err(Error::InvalidArgument("fold assignment does not match data".into()));
        }
    }

    let mut best: Option<(f64, SplineCandidate, Prepared<T>)> = None;
    for &c in &grid.candidates {
        let prep = match prepare(data, c, &mut warnings) {
            Ok(p) => p,
            Err(e @ (Error::SingularDesign { .. } | Error::InsufficientData(_))) => {
                warnings.push(format!("candidate k={}, d={} skipped: {e}", c.k, c.d));
                diagnostics.cv_table.push(CvScore { k: c.k, d: c.d, mean_mse: None });
                continue;
            }
            Err(e) => return Err(e),
        };
        let score = if single {
            Ok(f64::NAN)
        } else {
            cv_score(data, &prep, folds, grid.folds, grid.weight_scope, &mut warnings)
        };
        match score {
            Ok(mse) => {
                diagnostics.cv_table.push(CvScore {
                    k: c.k,
                    d: c.d,
                    mean_mse: (!single).then_some(mse),
                });
                // strict comparison keeps the first minimizer in grid order
                let better = match &best {
                    None => true,
                    Some((b, _, _)) => mse < *b,
                };
                if better {
                    best = Some((mse, c, prep));
                }
            }
            Err(e @ (Error::SingularDesign { .. } | Error::InsufficientData(_))) => {
                warnings.push(format!("candidate k={}, d={} skipped: {e}", c.k, c.d));
                diagnostics.cv_table.push(CvScore { k: c.k, d: c.d, mean_mse: None });
            }
            Err(e) => return Err(e),
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    diagnostics.warnings = warnings;

    let (_, chosen, prep) = best.ok_or_else(|| {
        Error::Estimation("every spline candidate produced a singular design".into())
    })?;
    diagnostics.selected = Some((chosen.k, chosen.d));

    let fit = wls_fit(&prep.design, data.y(), &prep.weights[..])?;
    let col = prep.design.treatment_col().expect("working model has treatment column");
    FitResult::from_t(
        method_for(grid),
        fit.coefficients[col],
        fit.se(col),
        fit.dof as f64,
        diagnostics,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;

    fn alternating(n: usize) -> Vec<Arm> {
        (0..n)
            .map(|i| if i % 2 == 0 { Arm::Treatment } else { Arm::Placebo })
            .collect()
    }

    #[test]
    fn noiseless_constant_drift_recovers_effect() {
        let n = 120;
        let t: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let arm = alternating(n);
        let y: Vec<f64> = arm.iter().map(|a| 0.5 * a.indicator::<f64>()).collect();
        let d = TrialData::new(y, t, arm).unwrap();
        let r = swsr_fit(&d, &CandidateGrid::default(), &mut stream(1, 0)).unwrap();
        assert_abs_diff_eq!(r.theta_hat.unwrap(), 0.5, epsilon = 1e-10);
        assert!(r.se.unwrap() < 1e-8);
        assert_eq!(r.method, Method::Swsr);
    }

    #[test]
    fn folds_are_balanced_and_cover_both_arms() {
        let arm = alternating(603);
        let folds = assign_folds(&arm, 5, &mut stream(9, 0)).unwrap();
        let mut sizes = [0usize; 5];
        for f in &folds {
            sizes[*f] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 120 || s == 121));
        assert!(training_sets_have_both_arms(&folds, &arm, 5));
    }

    #[test]
    fn stratified_fallback_when_one_arm_is_tiny() {
        // One treated patient: every uniform partition leaves it alone in a
        // fold whose training set lacks treatment, so stratification kicks in
        // but cannot help either; the assignment still completes.
        let mut arm = vec![Arm::Placebo; 20];
        arm[3] = Arm::Treatment;
        let folds = assign_folds(&arm, 5, &mut stream(2, 0)).unwrap();
        assert_eq!(folds.len(), 20);
    }

    #[test]
    fn too_few_patients_for_folds() {
        let arm = alternating(4);
        assert!(assign_folds(&arm, 5, &mut stream(2, 0)).is_err());
    }

    #[test]
    fn cv_table_and_selection_recorded() {
        let n = 200;
        let t: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let arm = alternating(n);
        let mut rng = stream(5, 1);
        let y: Vec<f64> = (0..n)
            .map(|i| (t[i] / 30.0).sin() + 0.2 * arm[i].indicator::<f64>() + 0.1 * (rng.random::<f64>() - 0.5))
            .collect();
        let d = TrialData::new(y, t, arm).unwrap();
        let r = swsr_fit(&d, &CandidateGrid::default(), &mut stream(5, 2)).unwrap();
        assert_eq!(r.diagnostics.cv_table.len(), 4);
        assert!(r.diagnostics.cv_table.iter().all(|c| c.mean_mse.is_some()));
        // a sine over ~1 period needs the 5-knot bases
        let (k, _) = r.diagnostics.selected.unwrap();
        assert_eq!(k, 5);
        let (lo, hi) = r.ci95.unwrap();
        assert!(lo <= r.theta_hat.unwrap() && r.theta_hat.unwrap() <= hi);
    }

    #[test]
    fn singular_candidates_skipped() {
        // 12 patients: k=100 produces more columns than rows.
        let n = 12;
        let t: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let arm = alternating(n);
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let d = TrialData::new(y, t, arm).unwrap();
        let grid = CandidateGrid::new(&[(100, 3), (0, 1)]);
        let r = swsr_fit(&d, &grid, &mut stream(3, 0)).unwrap();
        assert_eq!(r.diagnostics.selected, Some((0, 1)));
        assert!(r.diagnostics.cv_table[0].mean_mse.is_none());
        let all_bad = CandidateGrid::fixed(100, 3);
        assert!(matches!(
            swsr_fit(&d, &all_bad, &mut stream(3, 0)),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn fixed_grid_labels() {
        assert_eq!(method_for(&CandidateGrid::fixed(1, 1)), Method::SwsrSimple);
        assert_eq!(method_for(&CandidateGrid::fixed(100, 3)), Method::SwsrComplex);
        assert_eq!(method_for(&CandidateGrid::fixed(2, 2)), Method::Swsr);
    }
}
