//! Huber M-estimation by iteratively reweighted least squares.
//!
//! The scale is the normalized median absolute residual, re-estimated at the
//! start of every iteration. Standard errors use Huber's sandwich-free
//! correction
//!
//! ```text
//! S      = sum (s * psi(r_i / s))^2 / (n - p)
//! kappa  = 1 + p * var(psi') / (n * mean(psi')^2)
//! sd     = sqrt(S) * kappa / mean(psi')
//! cov    = sd^2 * (X^T X)^{-1}
//! ```

use super::{Diagnostics, FitResult, Method, TrialData};
use crate::error::{Error, Result};
use crate::linalg::Qr;
use crate::linmodels::{ols_fit, wls_fit, DesignSpec};
use crate::scalar::{median, Scalar};

/// Normal-consistency constant of the MAD.
pub const MAD_NORMALIZER: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberConfig {
    pub k: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for HuberConfig {
    fn default() -> Self {
        Self {
            k: 1.345,
            max_iter: 50,
            tol: 1e-8,
        }
    }
}

struct HuberFit<T> {
    coefficients: Vec<T>,
    residuals: Vec<T>,
    scale: T,
    iterations: usize,
    converged: bool,
}

fn huber_irls<T: Scalar>(x: &DesignSpec<T>, y: &[T], cfg: &HuberConfig) -> Result<HuberFit<T>> {
    let k = T::lit(cfg.k);
    let init = ols_fit(x, y)?;
    let mut beta = init.coefficients;
    let mut resid = init.residuals;
    let mut scale = T::zero();
    let mut converged = false;
    let mut iterations = 0;
    // a MAD at rounding level means the fit is exact
    let y_mag = y.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let scale_floor = T::epsilon() * T::lit(64.0) * y_mag;
    for it in 1..=cfg.max_iter {
        iterations = it;
        let abs: Vec<T> = resid.iter().map(|r| r.abs()).collect();
        scale = median(&abs) / T::lit(MAD_NORMALIZER);
        if scale <= scale_floor {
            return Err(Error::DegenerateScale);
        }
        let cut = k * scale;
        let w: Vec<T> = abs
            .iter()
            .map(|&a| if a <= cut { T::one() } else { cut / a })
            .collect();
        let fit = wls_fit(x, y, &w[..])?;
        let change = fit
            .coefficients
            .iter()
            .zip(&beta)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        beta = fit.coefficients;
        resid = fit.residuals;
        if change < T::lit(cfg.tol) {
            converged = true;
            break;
        }
    }
    Ok(HuberFit {
        coefficients: beta,
        residuals: resid,
        scale,
        iterations,
        converged,
    })
}

/// Robust regression on `[1, t, a]` with the default Huber settings.
pub fn rr_fit<T: Scalar>(data: &TrialData<T>) -> Result<FitResult<T>> {
    rr_fit_with(data, &HuberConfig::default())
}

pub fn rr_fit_with<T: Scalar>(data: &TrialData<T>, cfg: &HuberConfig) -> Result<FitResult<T>> {
    let design = DesignSpec::linear_time(data.t(), data.arm())?;
    let fit = huber_irls(&design, data.y(), cfg)?;
    let n = design.nrows();
    let p = design.ncols();
    let k = cfg.k;
    let s = fit.scale.as_f64();

    let mut sum_psi2 = 0.0;
    let mut inside = 0usize;
    for r in &fit.residuals {
        let u = r.as_f64() / s;
        let psi = u.clamp(-k, k);
        sum_psi2 += (s * psi) * (s * psi);
        if u.abs() <= k {
            inside += 1;
        }
    }
    if inside == 0 {
        return Err(Error::Estimation(
            "no residual inside the Huber threshold".into(),
        ));
    }
    let nf = n as f64;
    let big_s = sum_psi2 / (n - p) as f64;
    let mean_dpsi = inside as f64 / nf;
    // sample variance of the 0/1 derivative indicator
    let var_dpsi = (inside as f64 * (1.0 - mean_dpsi).powi(2)
        + (n - inside) as f64 * mean_dpsi.powi(2))
        / (nf - 1.0);
    let kappa = 1.0 + p as f64 * var_dpsi / (nf * mean_dpsi * mean_dpsi);
    let stddev = big_s.sqrt() * kappa / mean_dpsi;

    let col = design.treatment_col().expect("linear_time has treatment column");
    let xtx_inv = Qr::from_array(design.matrix()).gram_inverse();
    let se = stddev * xtx_inv[[col, col]].as_f64().max(0.0).sqrt();

    let mut diagnostics = Diagnostics {
        iterations: Some(fit.iterations),
        converged: Some(fit.converged),
        ..Diagnostics::default()
    };
    if !fit.converged {
        diagnostics.warnings.push(format!(
            "Huber IRLS did not converge in {} iterations",
            cfg.max_iter
        ));
    }
    FitResult::from_t(
        Method::Rr,
        fit.coefficients[col],
        T::lit(se),
        (n - p) as f64,
        diagnostics,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::slr_fit;
    use crate::linmodels::Arm;
    use approx::assert_abs_diff_eq;

    fn bounded_noise_data(n: usize) -> TrialData<f64> {
        let t: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let arm: Vec<Arm> = (0..n)
            .map(|i| if (i * 7) % 3 == 0 { Arm::Treatment } else { Arm::Placebo })
            .collect();
        // residual magnitudes within [0.8, 1.0] * 0.05: all inside the Huber cut
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let e = 0.05 * (0.8 + 0.2 * ((i * 13 % 7) as f64 / 6.0));
                let sign = if (i / 3) % 2 == 0 { 1.0 } else { -1.0 };
                1.0 + 0.02 * t[i] + 0.4 * arm[i].indicator::<f64>() + sign * e
            })
            .collect();
        TrialData::new(y, t, arm).unwrap()
    }

    #[test]
    fn equals_least_squares_without_outliers() {
        let d = bounded_noise_data(60);
        let rr = rr_fit(&d).unwrap();
        let ls = slr_fit(&d).unwrap();
        assert_abs_diff_eq!(rr.theta_hat.unwrap(), ls.theta_hat.unwrap(), epsilon = 1e-6);
        assert_eq!(rr.diagnostics.converged, Some(true));
    }

    #[test]
    fn downweights_an_outlier() {
        let d = bounded_noise_data(60);
        let mut y = d.y().to_vec();
        let idx = d.arm().iter().position(|a| *a == Arm::Treatment).unwrap();
        y[idx] += 25.0;
        let d2 = d.with_responses(y).unwrap();
        let rr = rr_fit(&d2).unwrap().theta_hat.unwrap();
        let ls = slr_fit(&d2).unwrap().theta_hat.unwrap();
        assert!((rr - 0.4).abs() < 0.05, "rr {rr}");
        assert!((ls - 0.4).abs() > 0.3, "ls {ls}");
    }

    #[test]
    fn zero_mad_is_degenerate() {
        let n = 12;
        let t: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let arm: Vec<Arm> = (0..n)
            .map(|i| if i % 2 == 0 { Arm::Treatment } else { Arm::Placebo })
            .collect();
        let y: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * arm[i].indicator::<f64>()).collect();
        let d = TrialData::new(y, t, arm).unwrap();
        assert!(matches!(rr_fit(&d), Err(Error::DegenerateScale)));
    }

    #[test]
    fn iteration_cap_reported() {
        let d = bounded_noise_data(60);
        let mut y = d.y().to_vec();
        y[5] += 3.0;
        y[17] -= 2.0;
        let d = d.with_responses(y).unwrap();
        let cfg = HuberConfig {
            max_iter: 1,
            ..HuberConfig::default()
        };
        let r = rr_fit_with(&d, &cfg).unwrap();
        assert_eq!(r.diagnostics.converged, Some(false));
        assert_eq!(r.diagnostics.warnings.len(), 1);
    }
}
