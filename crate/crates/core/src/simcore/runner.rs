//! Monte Carlo evaluation of the estimators on a scenario cell.
//!
//! Iteration `i` of a cell uses seed `derive_seed(master, i)` for the trial
//! and `derive_seed(iteration_seed, 100 + method.id())` for any randomness a
//! method needs (folds, re-randomizations). Outcomes are collected in
//! iteration order and aggregated sequentially, so a report depends only on
//! the master seed, never on the number of threads.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::scenario::{generate_trial, ScenarioSpec};
use crate::error::{Error, Result};
use crate::estimators::{
    rr_fit_with, slr_fit, swsr_fit, welch_t, wilcoxon, wlr_fit, CandidateGrid, FitResult,
    HuberConfig, Method, TrialData,
};
use crate::randtest::{rand_test, PermutationPlan, RandStatistic};
use crate::rng::{derive_seed, stream};

/// One-sided significance level used in every table.
pub const DEFAULT_ALPHA: f64 = 0.025;
/// Re-randomizations per trial inside simulations.
pub const SIM_N_PERM: usize = 1_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub alpha: f64,
    pub n_perm: usize,
    pub grid: CandidateGrid,
    pub huber: HuberConfig,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            n_perm: SIM_N_PERM,
            grid: CandidateGrid::default(),
            huber: HuberConfig::default(),
        }
    }
}

/// Runs one method on one dataset. `seed` feeds folds and permutations.
pub fn run_method(
    method: Method,
    data: &TrialData<f64>,
    opts: &SimOptions,
    seed: u64,
) -> Result<FitResult<f64>> {
    let fixed = |k, d| CandidateGrid {
        weight_scope: opts.grid.weight_scope,
        ..CandidateGrid::fixed(k, d)
    };
    let mut fit = match method {
        Method::Wtt => welch_t(data),
        Method::Wt => wilcoxon(data),
        Method::Slr => slr_fit(data),
        Method::Wlr => wlr_fit(data),
        Method::Rr => rr_fit_with(data, &opts.huber),
        Method::RtT => rand_test(data, RandStatistic::WelchT, &PermutationPlan::new(opts.n_perm, seed)),
        Method::RtW => rand_test(data, RandStatistic::RankSum, &PermutationPlan::new(opts.n_perm, seed)),
        Method::Swsr => swsr_fit(data, &opts.grid, &mut stream(seed, 0)),
        Method::SwsrSimple => swsr_fit(data, &fixed(1, 1), &mut stream(seed, 0)),
        Method::SwsrComplex => swsr_fit(data, &fixed(100, 3), &mut stream(seed, 0)),
    }?;
    fit.method = method;
    Ok(fit)
}

/// Per-iteration outcome of one method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub p_one_sided: f64,
    pub theta_hat: Option<f64>,
    pub covered: Option<bool>,
}

/// Raw outcomes of one method over all iterations, in iteration order.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub method: Method,
    /// `None` where the method failed on that iteration.
    pub outcomes: Vec<Option<Outcome>>,
    pub first_error: Option<String>,
}

impl MethodRun {
    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_none()).count()
    }

    pub fn p_values(&self) -> Vec<f64> {
        self.outcomes.iter().flatten().map(|o| o.p_one_sided).collect()
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.outcomes.iter().flatten().filter_map(|o| o.theta_hat).collect()
    }
}

/// Raw outcomes of a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRun {
    pub spec: ScenarioSpec,
    pub n_iter: usize,
    pub seed: u64,
    pub alpha: f64,
    pub methods: Vec<MethodRun>,
}

/// One line of a simulation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub method: Method,
    pub scenario: String,
    pub variance_setting: String,
    pub theta: f64,
    pub n_iter: usize,
    pub rejection_rate: Option<f64>,
    pub bias: Option<f64>,
    pub emp_se: Option<f64>,
    pub coverage: Option<f64>,
    pub failures: usize,
    pub seed: u64,
}

impl ReportRow {
    /// Output column order.
    pub const COLUMNS: [&'static str; 11] = [
        "method",
        "scenario",
        "variance_setting",
        "theta",
        "n_iter",
        "rejection_rate",
        "bias",
        "emp_se",
        "coverage",
        "failures",
        "seed",
    ];
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn sample_sd(v: &[f64]) -> Option<f64> {
    let m = mean(v)?;
    if v.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (v.len() - 1) as f64).sqrt())
}

impl CellRun {
    pub fn method(&self, method: Method) -> Option<&MethodRun> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        self.methods
            .iter()
            .map(|run| {
                let ok: Vec<&Outcome> = run.outcomes.iter().flatten().collect();
                let rejects: Vec<f64> = ok
                    .iter()
                    .map(|o| if o.p_one_sided < self.alpha { 1.0 } else { 0.0 })
                    .collect();
                let estimates = run.method.estimates_effect();
                let errors: Vec<f64> = ok
                    .iter()
                    .filter_map(|o| o.theta_hat)
                    .map(|th| th - self.spec.theta)
                    .collect();
                let covered: Vec<f64> = ok
                    .iter()
                    .filter_map(|o| o.covered)
                    .map(|c| if c { 1.0 } else { 0.0 })
                    .collect();
                ReportRow {
                    method: run.method,
                    scenario: self.spec.name.clone(),
                    variance_setting: self.spec.variance_label().to_string(),
                    theta: self.spec.theta,
                    n_iter: self.n_iter,
                    rejection_rate: mean(&rejects),
                    bias: if estimates { mean(&errors) } else { None },
                    emp_se: if estimates { sample_sd(&errors) } else { None },
                    coverage: if estimates { mean(&covered) } else { None },
                    failures: run.failures(),
                    seed: self.seed,
                }
            })
            .collect()
    }
}

type IterationResult = Vec<std::result::Result<Outcome, String>>;

fn run_iteration(
    spec: &ScenarioSpec,
    methods: &[Method],
    opts: &SimOptions,
    master_seed: u64,
    iteration: usize,
) -> Result<IterationResult> {
    let iter_seed = derive_seed(master_seed, iteration as u64);
    let data = generate_trial(spec, iter_seed)?;
    Ok(methods
        .iter()
        .map(|&m| {
            run_method(m, &data, opts, derive_seed(iter_seed, 100 + m.id()))
                .map(|fit| Outcome {
                    p_one_sided: fit.p_one_sided,
                    theta_hat: fit.theta_hat,
                    covered: fit.covers(spec.theta),
                })
                .map_err(|e| e.to_string())
        })
        .collect())
}

/// Raw outcomes of `methods` over `n_iter` simulated trials, using the
/// current rayon pool.
pub fn simulate_cell(
    spec: &ScenarioSpec,
    methods: &[Method],
    n_iter: usize,
    master_seed: u64,
    opts: &SimOptions,
) -> Result<CellRun> {
    if n_iter == 0 {
        return Err(Error::InvalidArgument("n_iter must be at least 1".into()));
    }
    spec.validate()?;
    opts.grid.validate()?;
    if methods.iter().any(|m| m.is_randomization()) && opts.n_perm == 0 {
        return Err(Error::InvalidArgument("n_perm must be at least 1".into()));
    }
    let per_iter: Vec<IterationResult> = (0..n_iter)
        .into_par_iter()
        .map(|i| run_iteration(spec, methods, opts, master_seed, i))
        .collect::<Result<_>>()?;

    let mut runs: Vec<MethodRun> = methods
        .iter()
        .map(|&method| MethodRun {
            method,
            outcomes: Vec::with_capacity(n_iter),
            first_error: None,
        })
        .collect();
    for iteration in per_iter {
        for (run, res) in runs.iter_mut().zip(iteration) {
            match res {
                Ok(o) => run.outcomes.push(Some(o)),
                Err(e) => {
                    run.first_error.get_or_insert(e);
                    run.outcomes.push(None);
                }
            }
        }
    }
    for run in &runs {
        if let Some(e) = &run.first_error {
            log::warn!(
                "{} failed on {} of {} iterations in {} ({}); first error: {e}",
                run.method,
                run.failures(),
                n_iter,
                spec.name,
                spec.variance_label()
            );
        }
    }
    Ok(CellRun {
        spec: spec.clone(),
        n_iter,
        seed: master_seed,
        alpha: opts.alpha,
        methods: runs,
    })
}

/// Aggregated report rows of one cell.
pub fn run_cell(
    spec: &ScenarioSpec,
    methods: &[Method],
    n_iter: usize,
    master_seed: u64,
    opts: &SimOptions,
) -> Result<Vec<ReportRow>> {
    Ok(simulate_cell(spec, methods, n_iter, master_seed, opts)?.rows())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub rows: Vec<ReportRow>,
    pub n_perm: usize,
    pub alpha: f64,
    pub wall_time_secs: f64,
}

/// Every cell of `specs` with the same master seed, on `threads` workers
/// (`None`: rayon's default).
pub fn run_grid(
    specs: &[ScenarioSpec],
    methods: &[Method],
    n_iter: usize,
    master_seed: u64,
    opts: &SimOptions,
    threads: Option<usize>,
) -> Result<SimulationReport> {
    let start = Instant::now();
    let rows = with_threads(threads, || {
        let mut rows = Vec::new();
        for spec in specs {
            log::info!("cell {} {} theta={}", spec.name, spec.variance_label(), spec.theta);
            rows.extend(run_cell(spec, methods, n_iter, master_seed, opts)?);
        }
        Ok::<_, Error>(rows)
    })??;
    Ok(SimulationReport {
        rows,
        n_perm: opts.n_perm,
        alpha: opts.alpha,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Runs `f` inside a dedicated pool of `threads` workers, or in the current
/// pool when `threads` is `None`.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidArgument("threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::{Scenario, VarianceSetting};

    #[test]
    fn single_iteration_is_a_zero_one_indicator() {
        let spec = ScenarioSpec::named(Scenario::S1, VarianceSetting::Equal, 0.0, Default::default());
        let rows = run_cell(&spec, &[Method::Wtt, Method::Wt], 1, 7, &SimOptions::default()).unwrap();
        for r in &rows {
            let rate = r.rejection_rate.unwrap();
            assert!(rate == 0.0 || rate == 1.0);
            assert_eq!(r.n_iter, 1);
        }
        assert!(rows[1].bias.is_none());
        assert_eq!(rows[0].emp_se, Some(0.0));
    }

    #[test]
    fn zero_iterations_rejected() {
        let spec = ScenarioSpec::named(Scenario::S1, VarianceSetting::Equal, 0.0, Default::default());
        assert!(run_cell(&spec, &[Method::Wtt], 0, 7, &SimOptions::default()).is_err());
    }
}
