//! Placebo trajectories `f(t)`.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;

/// How the second parameter of the random-walk increment law is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IncrementReading {
    /// `eta ~ N(0, v)` with `v` the variance.
    #[default]
    Variance,
    /// `eta ~ N(0, v^2)`: `v` is the standard deviation.
    StdDev,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DriftFamily {
    Zero,
    /// `rise * (t - t0) / (t1 - t0)`.
    LinearRamp { rise: f64, t0: f64, t1: f64 },
    /// Partial sums `sum_{l <= floor(t)} eta_l` of i.i.d. normal increments.
    RandomWalk { param: f64, reading: IncrementReading },
    /// `0.36 - 0.021 t + 0.00065 t^2`.
    CaseQuadratic,
    /// `0.46 - 0.507 t + 0.287 t^1.3 - 0.00977 t^2`.
    CasePower,
    /// `26.57 + 0.863 t - 11.34 ln(t + 10) - 0.0114 t^2`.
    CaseLog,
    /// `sin(2(4t - 2)) + 2 exp(-256 (t - 0.5)^2)` on `[0, 1]`.
    Figure1,
}

impl DriftFamily {
    pub fn is_random(&self) -> bool {
        matches!(self, DriftFamily::RandomWalk { .. })
    }

    /// Standard deviation of one random-walk increment.
    pub fn increment_sd(&self) -> Option<f64> {
        match *self {
            DriftFamily::RandomWalk { param, reading } => Some(match reading {
                IncrementReading::Variance => param.sqrt(),
                IncrementReading::StdDev => param,
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DriftFamily::RandomWalk { param, .. } if !(param > 0.0 && param.is_finite()) => Err(
                Error::InvalidArgument(format!("random-walk parameter must be positive, got {param}")),
            ),
            DriftFamily::LinearRamp { t0, t1, .. } if t0 == t1 => {
                Err(Error::InvalidArgument("linear ramp needs t0 != t1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// A drift family together with its realization, if random.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftFunction {
    family: DriftFamily,
    /// `partial[l]` is the sum of the first `l` increments; `partial[0] = 0`.
    partial: Option<Vec<f64>>,
}

impl DriftFunction {
    pub fn new(family: DriftFamily) -> Result<Self> {
        family.validate()?;
        Ok(Self {
            family,
            partial: None,
        })
    }

    pub fn family(&self) -> &DriftFamily {
        &self.family
    }

    pub fn is_realized(&self) -> bool {
        !self.family.is_random() || self.partial.is_some()
    }

    /// Draws the increments `eta_1 .. eta_floor(t_max)` from stream `seed`.
    /// Deterministic families are returned unchanged.
    pub fn realize(mut self, seed: u64, t_max: f64) -> Result<Self> {
        if let Some(sd) = self.family.increment_sd() {
            if !(t_max >= 0.0 && t_max.is_finite()) {
                return Err(Error::InvalidArgument(format!("bad time horizon {t_max}")));
            }
            let steps = t_max.floor() as usize;
            let normal = Normal::new(0.0, sd)
                .map_err(|e| Error::InvalidArgument(format!("increment law: {e}")))?;
            let mut rng = stream(seed, 0);
            let mut partial = Vec::with_capacity(steps + 1);
            let mut acc = 0.0;
            partial.push(acc);
            for _ in 0..steps {
                acc += normal.sample(&mut rng);
                partial.push(acc);
            }
            self.partial = Some(partial);
        }
        Ok(self)
    }

    /// Realized increments, if the family is random and realized.
    pub fn increments(&self) -> Option<Vec<f64>> {
        self.partial
            .as_ref()
            .map(|p| p.windows(2).map(|w| w[1] - w[0]).collect())
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(match self.family {
            DriftFamily::Zero => 0.0,
            DriftFamily::LinearRamp { rise, t0, t1 } => rise * (t - t0) / (t1 - t0),
            DriftFamily::RandomWalk { .. } => {
                let partial = self.partial.as_ref().ok_or(Error::UnrealizedDrift)?;
                if t < 0.0 {
                    return Ok(0.0);
                }
                let l = t.floor() as usize;
                let hi = (partial.len() - 1) as f64;
                *partial.get(l).ok_or(Error::OutsideDomain { t, lo: 0.0, hi })?
            }
            DriftFamily::CaseQuadratic => 0.36 - 0.021 * t + 0.00065 * t * t,
            DriftFamily::CasePower => 0.46 - 0.507 * t + 0.287 * t.powf(1.3) - 0.00977 * t * t,
            DriftFamily::CaseLog => 26.57 + 0.863 * t - 11.34 * (t + 10.0).ln() - 0.0114 * t * t,
            DriftFamily::Figure1 => {
                (2.0 * (4.0 * t - 2.0)).sin() + 2.0 * (-256.0 * (t - 0.5).powi(2)).exp()
            }
        })
    }
}

/// Evaluates `drift` at `t`.
pub fn drift_eval(drift: &DriftFunction, t: f64) -> Result<f64> {
    drift.eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ramp_endpoints() {
        let f = DriftFunction::new(DriftFamily::LinearRamp {
            rise: 0.3,
            t0: 1.0,
            t1: 600.0,
        })
        .unwrap();
        assert_eq!(f.eval(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(f.eval(600.0).unwrap(), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn random_walk_requires_realization() {
        let fam = DriftFamily::RandomWalk {
            param: 0.002,
            reading: IncrementReading::Variance,
        };
        let f = DriftFunction::new(fam).unwrap();
        assert!(matches!(f.eval(3.0), Err(Error::UnrealizedDrift)));
        let f = f.realize(5, 600.0).unwrap();
        assert_eq!(f.eval(0.5).unwrap(), 0.0);
        let inc = f.increments().unwrap();
        assert_eq!(inc.len(), 600);
        assert_abs_diff_eq!(f.eval(3.7).unwrap(), inc[0] + inc[1] + inc[2], epsilon = 1e-15);
        assert!(f.eval(601.0).is_err());
    }

    #[test]
    fn nonpositive_walk_variance_rejected() {
        let fam = DriftFamily::RandomWalk {
            param: 0.0,
            reading: IncrementReading::Variance,
        };
        assert!(DriftFunction::new(fam).is_err());
    }

    #[test]
    fn case_curves_at_origin() {
        let f = DriftFunction::new(DriftFamily::CaseQuadratic).unwrap();
        assert_abs_diff_eq!(f.eval(0.0).unwrap(), 0.36, epsilon = 1e-15);
        let f = DriftFunction::new(DriftFamily::CasePower).unwrap();
        assert_abs_diff_eq!(f.eval(0.0).unwrap(), 0.46, epsilon = 1e-15);
        let f = DriftFunction::new(DriftFamily::CaseLog).unwrap();
        assert_abs_diff_eq!(f.eval(0.0).unwrap(), 26.57 - 11.34 * 10f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn std_dev_reading_scales_increments() {
        let var = DriftFamily::RandomWalk {
            param: 0.04,
            reading: IncrementReading::Variance,
        };
        let sd = DriftFamily::RandomWalk {
            param: 0.04,
            reading: IncrementReading::StdDev,
        };
        assert_abs_diff_eq!(var.increment_sd().unwrap(), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(sd.increment_sd().unwrap(), 0.04, epsilon = 1e-15);
    }
}
