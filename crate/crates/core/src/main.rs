use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use swsr::cli;
use swsr::config::{parse_config, ExperimentConfig, Mode, OutputFormat};
use swsr::Result;

/// Treatment-effect estimation under a drifting placebo response.
///
/// Defaults: alpha = 0.025, folds = 5, grid = (1,1) (1,2) (5,2) (5,3),
/// n_iter = 10000, n_perm = 1000 in simulate mode and 10000 in analyze mode.
#[derive(Debug, Parser)]
#[command(name = "swsr", version)]
struct Args {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// analyze, simulate or demo; overrides the config.
    #[arg(long)]
    mode: Option<Mode>,

    /// Dataset for analyze mode (CSV with columns y, t, a).
    #[arg(long)]
    data: Option<PathBuf>,

    /// Master seed.
    #[arg(long, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
    seed: Option<u64>,

    /// Worker threads.
    #[arg(long, env = "SWSR_THREADS", value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,

    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,

    /// csv or json-lines.
    #[arg(long)]
    format: Option<OutputFormat>,

    /// Simulation results as a percent-formatted table.
    #[arg(long)]
    render_table: bool,

    /// Print the effective configuration and exit.
    #[arg(long)]
    echo_config: bool,
}

fn build_config(args: &Args) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.config, args.mode) {
        (Some(path), _) => {
            let mut text = std::fs::read_to_string(path)?;
            if let Some(mode) = args.mode {
                // the document may omit the mode when it is given on the command line
                if !text.lines().any(|l| l.trim_start().starts_with("mode")) {
                    text = format!("mode = \"{}\"\n{text}", format!("{mode:?}").to_lowercase());
                }
            }
            parse_config(&text)?
        }
        (None, Some(mode)) => ExperimentConfig::defaults(mode),
        (None, None) => {
            return Err(swsr::Error::Config(
                "mode: pass --mode or a --config document".into(),
            ))
        }
    };
    if let Some(mode) = args.mode {
        if mode != cfg.mode {
            cfg = ExperimentConfig { mode, ..cfg };
        }
    }
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.threads {
        cfg.threads = Some(t as usize);
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    if let Some(f) = args.format {
        cfg.format = f;
    }
    cfg.render_table |= args.render_table;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let result = build_config(&args).and_then(|cfg| {
        if args.echo_config {
            print!("{}", cfg.to_toml());
            Ok(())
        } else {
            cli::run(&cfg)
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
