//! Simulation scenarios, trial generation and Monte Carlo evaluation.

mod demo;
mod drift;
mod runner;
mod scenario;

pub use demo::{figure1_demo, CurveSample, DemoConfig, DemoSummary};
pub use drift::{drift_eval, DriftFamily, DriftFunction, IncrementReading};
pub use runner::{
    run_cell, run_grid, run_method, simulate_cell, with_threads, CellRun, MethodRun, Outcome,
    ReportRow, SimOptions, SimulationReport, DEFAULT_ALPHA, SIM_N_PERM,
};
pub use scenario::{
    generate_trial, generate_trial_with, GeneratedTrial, Scenario, ScenarioSpec, TimeRule,
    TrialSeeds, VarianceSetting,
};
