//! Mode dispatch and report I/O for the `swsr` binary.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::config::{ExperimentConfig, Mode, OutputFormat};
use crate::error::{Error, Result};
use crate::estimators::{FitResult, Method, TrialData};
use crate::linmodels::Arm;
use crate::rng::derive_seed;
use crate::simcore::{
    figure1_demo, run_grid, run_method, with_threads, DemoConfig, DemoSummary, ReportRow,
    ScenarioSpec, SimulationReport,
};

/// Reads a trial from CSV with a header naming `y`, `t` and `a` in any order.
/// Line numbers in errors are 1-based and count the header.
pub fn read_trial_csv<R: Read>(reader: R) -> Result<TrialData<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data {
                line: 1,
                message: format!("missing column '{name}'"),
            })
    };
    let (iy, it, ia) = (col("y")?, col("t")?, col("a")?);

    let (mut y, mut t, mut arm) = (Vec::new(), Vec::new(), Vec::new());
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::Data {
            line,
            message: e.to_string(),
        })?;
        let field = |i: usize, name: &str| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Data {
                    line,
                    message: format!("{name}: not a finite number: '{raw}'"),
                })
        };
        y.push(field(iy, "y")?);
        t.push(field(it, "t")?);
        let a = field(ia, "a")?;
        let a = match a {
            v if v == 0.0 => Arm::Placebo,
            v if v == 1.0 => Arm::Treatment,
            v => {
                return Err(Error::Data {
                    line,
                    message: format!("a must be 0 or 1, got {v}"),
                })
            }
        };
        arm.push(a);
    }
    TrialData::new(y, t, arm)
}

pub fn read_trial_file(path: &Path) -> Result<TrialData<f64>> {
    read_trial_csv(File::open(path)?)
}

/// One analysis line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisRow {
    pub method: Method,
    pub theta_hat: Option<f64>,
    pub se: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub p_one_sided: Option<f64>,
    pub df: Option<f64>,
    pub selected_k: Option<usize>,
    pub selected_d: Option<usize>,
    pub note: String,
}

impl AnalysisRow {
    fn from_fit(fit: &FitResult<f64>) -> Self {
        Self {
            method: fit.method,
            theta_hat: fit.theta_hat,
            se: fit.se,
            ci_lower: fit.ci95.map(|c| c.0),
            ci_upper: fit.ci95.map(|c| c.1),
            p_one_sided: Some(fit.p_one_sided),
            df: fit.diagnostics.df,
            selected_k: fit.diagnostics.selected.map(|s| s.0),
            selected_d: fit.diagnostics.selected.map(|s| s.1),
            note: fit.diagnostics.warnings.join("; "),
        }
    }

    fn failed(method: Method, err: &Error) -> Self {
        Self {
            method,
            theta_hat: None,
            se: None,
            ci_lower: None,
            ci_upper: None,
            p_one_sided: None,
            df: None,
            selected_k: None,
            selected_d: None,
            note: format!("error: {err}"),
        }
    }
}

/// Every configured method on one dataset. A failing method yields a row
/// carrying its error.
pub fn analyze(data: &TrialData<f64>, cfg: &ExperimentConfig) -> Vec<AnalysisRow> {
    let opts = cfg.sim_options();
    cfg.methods
        .iter()
        .map(|&m| match run_method(m, data, &opts, derive_seed(cfg.seed, m.id())) {
            Ok(fit) => AnalysisRow::from_fit(&fit),
            Err(e) => {
                log::error!("{m}: {e}");
                AnalysisRow::failed(m, &e)
            }
        })
        .collect()
}

/// Cells in config order: scenario, then variance setting, then theta.
pub fn scenario_grid(cfg: &ExperimentConfig) -> Vec<ScenarioSpec> {
    let mut specs = Vec::new();
    for &s in &cfg.scenarios {
        for &v in &cfg.variance {
            for &theta in &cfg.thetas {
                specs.push(ScenarioSpec::named(s, v, theta, cfg.increment_reading));
            }
        }
    }
    specs
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<SimulationReport> {
    run_grid(
        &scenario_grid(cfg),
        &cfg.methods,
        cfg.n_iter,
        cfg.seed,
        &cfg.sim_options(),
        cfg.threads,
    )
}

pub fn demo(cfg: &ExperimentConfig) -> Result<DemoSummary> {
    figure1_demo(&DemoConfig {
        n_points: cfg.demo_points,
        k: cfg.demo_k,
        d: cfg.demo_d,
        noise_sd: cfg.demo_noise_sd,
        seed: cfg.seed,
        ..DemoConfig::default()
    })
}

fn write_serialized<W: Write, S: Serialize>(out: W, rows: &[S], format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        OutputFormat::JsonLines => {
            let mut out = out;
            for r in rows {
                serde_json::to_writer(&mut out, r)?;
                writeln!(out)?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

/// Report rows at full precision, columns in [`ReportRow::COLUMNS`] order.
pub fn write_report<W: Write>(out: W, rows: &[ReportRow], format: OutputFormat) -> Result<()> {
    write_serialized(out, rows, format)
}

pub fn write_analysis<W: Write>(out: W, rows: &[AnalysisRow], format: OutputFormat) -> Result<()> {
    write_serialized(out, rows, format)
}

/// Plot-ready curve samples: `t, f_true, f_hat, basis_1 .. basis_n`.
pub fn write_demo<W: Write>(out: W, summary: &DemoSummary, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let mut header = vec!["t".to_string(), "f_true".into(), "f_hat".into()];
            header.extend((1..=summary.n_basis).map(|j| format!("basis_{j}")));
            w.write_record(&header)?;
            for s in &summary.samples {
                let mut rec = vec![s.t.to_string(), s.f_true.to_string(), s.f_hat.to_string()];
                rec.extend(s.scaled_basis.iter().map(|v| v.to_string()));
                w.write_record(&rec)?;
            }
            w.flush()?;
            Ok(())
        }
        OutputFormat::JsonLines => write_serialized(out, &summary.samples, format),
    }
}

fn pct(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{:.*}", digits, 100.0 * x))
}

/// Table with rates in percent, bias x1000 and empirical SE x100.
pub fn render_table(rows: &[ReportRow]) -> String {
    let header = [
        "method", "scenario", "variance", "theta", "reject%", "bias*1e3", "se*1e2", "cover%",
        "fail",
    ];
    let body: Vec<[String; 9]> = rows
        .iter()
        .map(|r| {
            [
                r.method.to_string(),
                r.scenario.clone(),
                r.variance_setting.clone(),
                format!("{}", r.theta),
                pct(r.rejection_rate, 2),
                r.bias.map_or_else(|| "-".into(), |b| format!("{:.1}", b * 1e3)),
                r.emp_se.map_or_else(|| "-".into(), |s| format!("{:.1}", s * 1e2)),
                pct(r.coverage, 1),
                r.failures.to_string(),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    for row in &body {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

fn open_output(cfg: &ExperimentConfig) -> Result<Box<dyn Write>> {
    Ok(match &cfg.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Executes the configured mode and writes its output.
pub fn run(cfg: &ExperimentConfig) -> Result<()> {
    match cfg.mode {
        Mode::Analyze => {
            let path = cfg
                .data
                .as_ref()
                .ok_or_else(|| Error::Config("data: required in analyze mode".into()))?;
            if !path.exists() {
                return Err(Error::Config(format!("data: no such file {}", path.display())));
            }
            let data = read_trial_file(path)?;
            let rows = with_threads(cfg.threads, || analyze(&data, cfg))?;
            write_analysis(open_output(cfg)?, &rows, cfg.format)
        }
        Mode::Simulate => {
            let report = simulate(cfg)?;
            log::info!(
                "{} rows in {:.1} s (n_perm = {})",
                report.rows.len(),
                report.wall_time_secs,
                report.n_perm
            );
            let mut out = open_output(cfg)?;
            if cfg.render_table {
                out.write_all(render_table(&report.rows).as_bytes())?;
                out.flush()?;
                Ok(())
            } else {
                write_report(out, &report.rows, cfg.format)
            }
        }
        Mode::Demo => {
            let summary = demo(cfg)?;
            log::info!(
                "{} basis functions, RMSE against the true curve {:.4}",
                summary.n_basis,
                summary.rmse
            );
            write_demo(open_output(cfg)?, &summary, cfg.format)
        }
    }
}
