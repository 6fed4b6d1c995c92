//! Experiment configuration: a flat TOML document.
//!
//! ```toml
//! mode = "simulate"
//! scenarios = ["S1", "S3"]
//! variance = ["equal", "unequal"]
//! thetas = [0.0, 0.1]
//! methods = ["WTT", "SWSR"]
//! n_iter = 10000
//! ```
//!
//! Every key is optional except `mode`; see [`ExperimentConfig`] for defaults.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{CandidateGrid, Method, SplineCandidate, WeightScope};
use crate::simcore::{IncrementReading, Scenario, SimOptions, VarianceSetting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analyze,
    Simulate,
    Demo,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "analyze" => Ok(Mode::Analyze),
            "simulate" => Ok(Mode::Simulate),
            "demo" => Ok(Mode::Demo),
            _ => Err(Error::Config(format!(
                "mode: expected analyze, simulate or demo, got '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    JsonLines,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json-lines" | "jsonl" => Ok(OutputFormat::JsonLines),
            _ => Err(Error::Config(format!(
                "format: expected csv or json-lines, got '{s}'"
            ))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::JsonLines => "json-lines",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScopeSetting {
    #[default]
    FullData,
    PerFold,
}

impl From<WeightScopeSetting> for WeightScope {
    fn from(w: WeightScopeSetting) -> Self {
        match w {
            WeightScopeSetting::FullData => WeightScope::FullData,
            WeightScopeSetting::PerFold => WeightScope::PerFold,
        }
    }
}

pub const DEFAULT_N_ITER: usize = 10_000;
pub const DEFAULT_SIM_N_PERM: usize = 1_000;
pub const DEFAULT_ANALYZE_N_PERM: usize = 10_000;
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// CSV with columns `y`, `t`, `a` (analyze mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    pub scenarios: Vec<Scenario>,
    pub variance: Vec<VarianceSetting>,
    pub thetas: Vec<f64>,
    pub methods: Vec<Method>,
    pub n_iter: usize,
    pub alpha: f64,
    pub seed: u64,
    pub n_perm: usize,
    /// `(k, d)` candidates.
    pub grid: Vec<[usize; 2]>,
    pub folds: usize,
    pub weight_scope: WeightScopeSetting,
    pub increment_reading: IncrementReading,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub render_table: bool,
    pub demo_points: usize,
    pub demo_k: usize,
    pub demo_d: usize,
    pub demo_noise_sd: f64,
}

/// Raw document; `None` means "use the default".
#[derive(Debug, Default, Deserialize)]
struct RawConfig {
    mode: Option<String>,
    data: Option<PathBuf>,
    scenarios: Option<Vec<String>>,
    variance: Option<Vec<String>>,
    thetas: Option<Vec<f64>>,
    methods: Option<Vec<String>>,
    n_iter: Option<i64>,
    alpha: Option<f64>,
    seed: Option<i64>,
    n_perm: Option<i64>,
    grid: Option<Vec<Vec<i64>>>,
    folds: Option<i64>,
    weight_scope: Option<WeightScopeSetting>,
    increment_reading: Option<IncrementReading>,
    threads: Option<i64>,
    out: Option<PathBuf>,
    format: Option<String>,
    render_table: Option<bool>,
    demo_points: Option<i64>,
    demo_k: Option<i64>,
    demo_d: Option<i64>,
    demo_noise_sd: Option<f64>,
}

const KNOWN_KEYS: [&str; 22] = [
    "mode",
    "data",
    "scenarios",
    "variance",
    "thetas",
    "methods",
    "n_iter",
    "alpha",
    "seed",
    "n_perm",
    "grid",
    "folds",
    "weight_scope",
    "increment_reading",
    "threads",
    "out",
    "format",
    "render_table",
    "demo_points",
    "demo_k",
    "demo_d",
    "demo_noise_sd",
];

fn invalid(field: &str, constraint: impl fmt::Display) -> Error {
    Error::Config(format!("{field}: {constraint}"))
}

fn count(field: &str, v: Option<i64>, default: usize, min: usize) -> Result<usize> {
    match v {
        None => Ok(default),
        Some(x) if x >= min as i64 => Ok(x as usize),
        Some(x) => Err(invalid(field, format!("must be at least {min}, got {x}"))),
    }
}

fn parse_list<T: FromStr<Err = Error>>(field: &str, v: Option<Vec<String>>, default: Vec<T>) -> Result<Vec<T>> {
    match v {
        None => Ok(default),
        Some(items) if items.is_empty() => Err(invalid(field, "must not be empty")),
        Some(items) => items
            .iter()
            .map(|s| s.parse().map_err(|e: Error| invalid(field, e)))
            .collect(),
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(format!("malformed document: {e}")))?;
    let unknown: Vec<&str> = table
        .keys()
        .map(String::as_str)
        .filter(|k| !KNOWN_KEYS.contains(k))
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))));
    }
    let raw: RawConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    from_raw(raw)
}

fn from_raw(raw: RawConfig) -> Result<ExperimentConfig> {
    let mode: Mode = raw
        .mode
        .as_deref()
        .ok_or_else(|| invalid("mode", "is required"))?
        .parse()?;

    let alpha = raw.alpha.unwrap_or(0.025);
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(invalid("alpha", format!("must lie in (0, 0.5), got {alpha}")));
    }
    let thetas = raw.thetas.unwrap_or_else(|| vec![0.0]);
    if thetas.is_empty() || thetas.iter().any(|t| !t.is_finite()) {
        return Err(invalid("thetas", "must be a nonempty list of finite numbers"));
    }
    let seed = match raw.seed {
        None => DEFAULT_SEED,
        Some(s) if s >= 0 => s as u64,
        Some(s) => return Err(invalid("seed", format!("must be nonnegative, got {s}"))),
    };
    let default_perm = match mode {
        Mode::Analyze => DEFAULT_ANALYZE_N_PERM,
        _ => DEFAULT_SIM_N_PERM,
    };
    let default_methods = Method::STANDARD.to_vec();
    let grid = match raw.grid {
        None => CandidateGrid::default()
            .candidates
            .iter()
            .map(|c| [c.k, c.d])
            .collect(),
        Some(pairs) => {
            if pairs.is_empty() {
                return Err(invalid("grid", "must not be empty"));
            }
            pairs
                .iter()
                .map(|p| match p.as_slice() {
                    [k, d] if *k >= 0 && *d >= 0 => Ok([*k as usize, *d as usize]),
                    _ => Err(invalid("grid", "entries must be [k, d] with k >= 0 and d >= 0")),
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let demo_noise_sd = raw.demo_noise_sd.unwrap_or(0.3);
    if !(demo_noise_sd >= 0.0 && demo_noise_sd.is_finite()) {
        return Err(invalid("demo_noise_sd", "must be a finite nonnegative number"));
    }
    let threads = match raw.threads {
        None => None,
        Some(t) => Some(count("threads", Some(t), 1, 1)?),
    };

    Ok(ExperimentConfig {
        mode,
        data: raw.data,
        scenarios: parse_list("scenarios", raw.scenarios, vec![Scenario::S1])?,
        variance: parse_list("variance", raw.variance, vec![VarianceSetting::Equal])?,
        thetas,
        methods: parse_list("methods", raw.methods, default_methods)?,
        n_iter: count("n_iter", raw.n_iter, DEFAULT_N_ITER, 1)?,
        alpha,
        seed,
        n_perm: count("n_perm", raw.n_perm, default_perm, 1)?,
        grid,
        folds: count("folds", raw.folds, 5, 2)?,
        weight_scope: raw.weight_scope.unwrap_or_default(),
        increment_reading: raw.increment_reading.unwrap_or_default(),
        threads,
        out: raw.out,
        format: raw.format.as_deref().map(str::parse).transpose()?.unwrap_or_default(),
        render_table: raw.render_table.unwrap_or(false),
        demo_points: count("demo_points", raw.demo_points, 300, 2)?,
        demo_k: count("demo_k", raw.demo_k, 16, 0)?,
        demo_d: count("demo_d", raw.demo_d, 3, 0)?,
        demo_noise_sd,
    })
}

impl ExperimentConfig {
    /// Defaults for `mode` with nothing else set.
    pub fn defaults(mode: Mode) -> Self {
        from_raw(RawConfig {
            mode: Some(format!("{mode:?}").to_lowercase()),
            ..RawConfig::default()
        })
        .expect("defaults are valid")
    }

    /// The configuration as a TOML document that parses back to `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn candidate_grid(&self) -> CandidateGrid {
        CandidateGrid {
            candidates: self
                .grid
                .iter()
                .map(|&[k, d]| SplineCandidate { k, d })
                .collect(),
            folds: self.folds,
            weight_scope: self.weight_scope.into(),
        }
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            alpha: self.alpha,
            n_perm: self.n_perm,
            grid: self.candidate_grid(),
            ..SimOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = parse_config("mode = \"simulate\"\nscenarios = [\"S1\"]").unwrap();
        assert_eq!(c.alpha, 0.025);
        assert_eq!(c.folds, 5);
        assert_eq!(c.n_iter, 10_000);
        assert_eq!(c.n_perm, 1_000);
        assert_eq!(c.grid, vec![[1, 1], [1, 2], [5, 2], [5, 3]]);
        assert_eq!(c.methods.len(), 8);
        let a = parse_config("mode = \"analyze\"").unwrap();
        assert_eq!(a.n_perm, 10_000);
    }

    #[test]
    fn echo_round_trips() {
        let c = parse_config(
            "mode = \"simulate\"\nthetas = [0.0, 0.1]\nthreads = 3\nformat = \"json-lines\"\nweight_scope = \"per-fold\"",
        )
        .unwrap();
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
        let d = ExperimentConfig::defaults(Mode::Demo);
        assert_eq!(parse_config(&d.to_toml()).unwrap(), d);
    }

    #[test]
    fn errors_name_the_field() {
        let e = parse_config("mode = \"simulate\"\nalpha = 1.5").unwrap_err();
        assert!(e.to_string().contains("alpha"), "{e}");
        let e = parse_config("mode = \"simulate\"\ngrid = [[-1, 2]]").unwrap_err();
        assert!(e.to_string().contains("grid"), "{e}");
        let e = parse_config("mode = \"simulate\"\nn_iter = 0").unwrap_err();
        assert!(e.to_string().contains("n_iter"), "{e}");
    }

    #[test]
    fn unknown_keys_listed() {
        let e = parse_config("mode = \"demo\"\nfoo = 1\nbar = 2").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("foo") && msg.contains("bar"), "{msg}");
    }
}
