//! Unweighted spline fit of a bumpy curve, for plotting a basis and its fit.

use ndarray::Array2;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::drift::{DriftFamily, DriftFunction};
use super::scenario::TimeRule;
use crate::bspline::{design_matrix, make_knot_vector};
use crate::error::{Error, Result};
use crate::linmodels::{ols_fit, ColumnRole, DesignSpec};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoConfig {
    pub n_points: usize,
    pub k: usize,
    pub d: usize,
    pub noise_sd: f64,
    pub seed: u64,
    /// Points of the evaluation grid on `[0, 1]`.
    pub grid_points: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            n_points: 300,
            k: 16,
            d: 3,
            noise_sd: 0.3,
            seed: 1,
            grid_points: 1001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSample {
    pub t: f64,
    pub f_true: f64,
    pub f_hat: f64,
    /// `gamma_j * B_j(t)`; these add up to `f_hat`.
    pub scaled_basis: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoSummary {
    pub n_basis: usize,
    pub interior_knots: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// Root mean squared error of the fit against the true curve on the grid.
    pub rmse: f64,
    pub samples: Vec<CurveSample>,
}

pub fn figure1_demo(cfg: &DemoConfig) -> Result<DemoSummary> {
    if cfg.grid_points < 2 {
        return Err(Error::InvalidArgument("grid_points must be at least 2".into()));
    }
    let truth = DriftFunction::new(DriftFamily::Figure1)?;
    let domain = TimeRule::Range { lo: 0.0, hi: 1.0 };
    let t = domain.times(cfg.n_points);
    let noise = Normal::new(0.0, cfg.noise_sd)
        .map_err(|e| Error::InvalidArgument(format!("noise_sd: {e}")))?;
    let mut rng = stream(cfg.seed, 0);
    let y = t
        .iter()
        .map(|&ti| Ok(truth.eval(ti)? + noise.sample(&mut rng)))
        .collect::<Result<Vec<f64>>>()?;

    let knots = make_knot_vector(&t, cfg.k, cfg.d)?;
    let basis = design_matrix(&t, &knots)?;
    let nb = basis.n_basis();
    let roles = (1..=nb).map(ColumnRole::SplineBasis).collect::<Vec<_>>();
    let design = DesignSpec::new(roles, basis.into_values())?;
    let fit = ols_fit(&design, &y)?;
    let gamma = fit.coefficients;

    let grid = domain.times(cfg.grid_points);
    let grid_basis: Array2<f64> = design_matrix(&grid, &knots)?.into_values();
    let mut sq = 0.0;
    let samples = grid
        .iter()
        .enumerate()
        .map(|(r, &g)| {
            let scaled: Vec<f64> = (0..nb).map(|j| gamma[j] * grid_basis[[r, j]]).collect();
            let f_hat: f64 = scaled.iter().sum();
            let f_true = truth.eval(g)?;
            sq += (f_hat - f_true).powi(2);
            Ok(CurveSample {
                t: g,
                f_true,
                f_hat,
                scaled_basis: scaled,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DemoSummary {
        n_basis: nb,
        interior_knots: knots.interior().to_vec(),
        coefficients: gamma,
        rmse: (sq / grid.len() as f64).sqrt(),
        samples,
    })
}
