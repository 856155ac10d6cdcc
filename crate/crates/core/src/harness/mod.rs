//! Scenario files, runs, sweeps and their deterministic outputs.

pub mod config;
pub mod scenario;
pub mod sweep;

pub use config::{DriveSpec, ScenarioConfig, Scheme, Vary};
pub use scenario::{
    predicted_optimum, resolve, run_husimi, run_scenario, scenario_summary, write_husimi_outputs,
    write_scenario_outputs, HusimiOutcome, PreparedScenario, Resolved, ScenarioOutcome, Summary,
};
pub use sweep::{delta_sweep, fit_power_law, imperfection_sweep, scaling_sweep, Fit, SweepKind, SweepResult, SweepRow};
