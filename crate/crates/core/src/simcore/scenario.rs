//! Scenario specifications and trial generation.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::drift::{DriftFamily, DriftFunction, IncrementReading};
use crate::error::{Error, Result};
use crate::estimators::TrialData;
use crate::linmodels::Arm;
use crate::rng::{derive_seed, stream};

/// Named drift scenarios: `S1`..`S4` for the N = 600 studies, `CS1`..`CS3`
/// for the 30-month case study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Scenario {
    S1,
    S2,
    S3,
    S4,
    Cs1,
    Cs2,
    Cs3,
}

impl Scenario {
    pub const SIMULATION: [Scenario; 4] = [Scenario::S1, Scenario::S2, Scenario::S3, Scenario::S4];
    pub const CASE_STUDY: [Scenario; 3] = [Scenario::Cs1, Scenario::Cs2, Scenario::Cs3];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::S1 => "S1",
            Scenario::S2 => "S2",
            Scenario::S3 => "S3",
            Scenario::S4 => "S4",
            Scenario::Cs1 => "CS1",
            Scenario::Cs2 => "CS2",
            Scenario::Cs3 => "CS3",
        }
    }

    pub fn is_case_study(self) -> bool {
        matches!(self, Scenario::Cs1 | Scenario::Cs2 | Scenario::Cs3)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase();
        [Scenario::SIMULATION.as_slice(), Scenario::CASE_STUDY.as_slice()]
            .concat()
            .into_iter()
            .find(|c| c.label() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario '{s}'")))
    }
}

impl From<Scenario> for String {
    fn from(s: Scenario) -> Self {
        s.label().to_string()
    }
}

impl TryFrom<String> for Scenario {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// `equal`: sigma_p = sigma_t = 0.3. `unequal`: sigma_p = 0.4, sigma_t = 0.2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum VarianceSetting {
    Equal,
    Unequal,
}

impl VarianceSetting {
    pub fn label(self) -> &'static str {
        match self {
            VarianceSetting::Equal => "equal",
            VarianceSetting::Unequal => "unequal",
        }
    }

    /// `(sigma_p, sigma_t)`.
    pub fn sigmas(self) -> (f64, f64) {
        match self {
            VarianceSetting::Equal => (0.3, 0.3),
            VarianceSetting::Unequal => (0.4, 0.2),
        }
    }
}

impl fmt::Display for VarianceSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for VarianceSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "equal" | "e" => Ok(VarianceSetting::Equal),
            "unequal" | "u" => Ok(VarianceSetting::Unequal),
            _ => Err(Error::InvalidArgument(format!("unknown variance setting '{s}'"))),
        }
    }
}

impl From<VarianceSetting> for String {
    fn from(v: VarianceSetting) -> Self {
        v.label().to_string()
    }
}

impl TryFrom<String> for VarianceSetting {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Collection times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeRule {
    /// `t_i = i` for `i = 1..N`.
    Index,
    /// `N` points evenly spaced over `[lo, hi]`.
    Range { lo: f64, hi: f64 },
}

impl TimeRule {
    pub fn times(&self, n: usize) -> Vec<f64> {
        match *self {
            TimeRule::Index => (1..=n).map(|i| i as f64).collect(),
            TimeRule::Range { lo, hi } => {
                if n == 1 {
                    return vec![lo];
                }
                let step = (hi - lo) / (n - 1) as f64;
                (0..n)
                    .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// Scenario label used in reports.
    pub name: String,
    pub drift: DriftFamily,
    pub theta: f64,
    pub sigma_p: f64,
    pub sigma_t: f64,
    pub n_p: usize,
    pub n_t: usize,
    pub time_rule: TimeRule,
}

impl ScenarioSpec {
    /// Named scenario at its published sample sizes: N = 600 with `t_i = i`
    /// (300/300 under `equal`, 150/450 under `unequal`), or the case study's
    /// 200/200 patients evenly spaced over months 0 to 30.
    pub fn named(
        scenario: Scenario,
        setting: VarianceSetting,
        theta: f64,
        reading: IncrementReading,
    ) -> Self {
        let (sigma_p, sigma_t) = setting.sigmas();
        let (n_p, n_t, time_rule) = if scenario.is_case_study() {
            (200, 200, TimeRule::Range { lo: 0.0, hi: 30.0 })
        } else {
            match setting {
                VarianceSetting::Equal => (300, 300, TimeRule::Index),
                VarianceSetting::Unequal => (150, 450, TimeRule::Index),
            }
        };
        let n = (n_p + n_t) as f64;
        let drift = match scenario {
            Scenario::S1 => DriftFamily::Zero,
            Scenario::S2 => DriftFamily::LinearRamp {
                rise: 0.3,
                t0: 1.0,
                t1: n,
            },
            Scenario::S3 => DriftFamily::RandomWalk {
                param: 0.002,
                reading,
            },
            Scenario::S4 => DriftFamily::RandomWalk {
                param: 0.004,
                reading,
            },
            Scenario::Cs1 => DriftFamily::CaseQuadratic,
            Scenario::Cs2 => DriftFamily::CasePower,
            Scenario::Cs3 => DriftFamily::CaseLog,
        };
        Self {
            name: scenario.label().to_string(),
            drift,
            theta,
            sigma_p,
            sigma_t,
            n_p,
            n_t,
            time_rule,
        }
    }

    pub fn n(&self) -> usize {
        self.n_p + self.n_t
    }

    /// `equal` when the two standard deviations coincide.
    pub fn variance_label(&self) -> &'static str {
        if self.sigma_p == self.sigma_t {
            "equal"
        } else {
            "unequal"
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.drift.validate()?;
        if !(self.sigma_p > 0.0 && self.sigma_t > 0.0) {
            return Err(Error::InvalidArgument("standard deviations must be positive".into()));
        }
        if self.n_p == 0 || self.n_t == 0 {
            return Err(Error::InvalidArgument("both arms need at least one patient".into()));
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidArgument("theta must be finite".into()));
        }
        if let TimeRule::Range { lo, hi } = self.time_rule {
            if !(lo < hi) {
                return Err(Error::InvalidArgument("time range needs lo < hi".into()));
            }
        }
        Ok(())
    }
}

/// Independent seeds for the three random ingredients of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub drift: u64,
    pub assignment: u64,
    pub noise: u64,
}

impl TrialSeeds {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            drift: derive_seed(seed, 0),
            assignment: derive_seed(seed, 1),
            noise: derive_seed(seed, 2),
        }
    }
}

/// A generated trial with the drift values at each patient's time.
#[derive(Debug, Clone)]
pub struct GeneratedTrial {
    pub data: TrialData<f64>,
    pub f: Vec<f64>,
}

/// Trial from `spec` with all randomness derived from `seed`.
pub fn generate_trial(spec: &ScenarioSpec, seed: u64) -> Result<TrialData<f64>> {
    Ok(generate_trial_with(spec, TrialSeeds::from_seed(seed))?.data)
}

pub fn generate_trial_with(spec: &ScenarioSpec, seeds: TrialSeeds) -> Result<GeneratedTrial> {
    spec.validate()?;
    let n = spec.n();
    let t = spec.time_rule.times(n);
    let t_max = t.iter().copied().fold(0.0, f64::max);
    let drift = DriftFunction::new(spec.drift)?.realize(seeds.drift, t_max)?;
    let f = t.iter().map(|&ti| drift.eval(ti)).collect::<Result<Vec<_>>>()?;

    let mut arm = vec![Arm::Placebo; spec.n_p];
    arm.extend(std::iter::repeat_n(Arm::Treatment, spec.n_t));
    arm.shuffle(&mut stream(seeds.assignment, 0));

    let mut rng = stream(seeds.noise, 0);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let y = (0..n)
        .map(|i| {
            let (sd, shift) = match arm[i] {
                Arm::Placebo => (spec.sigma_p, 0.0),
                Arm::Treatment => (spec.sigma_t, spec.theta),
            };
            f[i] + shift + sd * std_normal.sample(&mut rng)
        })
        .collect();
    Ok(GeneratedTrial {
        data: TrialData::new(y, t, arm)?,
        f,
    })
}
