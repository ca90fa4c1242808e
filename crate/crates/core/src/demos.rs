//! End-to-end demonstrations on the two benchmark systems. Each runs the
//! Monte-Carlo pipeline, checks that smoothing never widens the estimate, and
//! writes the usual CSV files.

use std::path::Path;

use thiserror::Error;

use crate::harness::{self, ExperimentConfig, HarnessError, Summary, SystemSpec, Task};

/// Slack allowed on `diameter(smoothed) ≤ diameter(filtered)` for LP round-off.
pub const DIAMETER_SLACK: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("demo expects a {expected} system")]
    WrongSystem { expected: &'static str },
    #[error("trial {trial}, step {k}: smoothed diameter {smoothed} exceeds filtered diameter {filtered}")]
    Widened {
        trial: u64,
        k: usize,
        filtered: f64,
        smoothed: f64,
    },
}

fn check_not_wider(summary: &Summary) -> Result<(), DemoError> {
    for t in &summary.record.trials {
        for s in &t.steps {
            let (f, sm) = (s.filtered_diameter(), s.smoothed_diameter());
            if sm > f + DIAMETER_SLACK {
                return Err(DemoError::Widened {
                    trial: t.trial,
                    k: s.k,
                    filtered: f,
                    smoothed: sm,
                });
            }
        }
    }
    Ok(())
}

fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Summary, DemoError> {
    let summary = harness::run_experiment(cfg, Task::Smooth, out)?;
    check_not_wider(&summary)?;
    Ok(summary)
}

/// Filter and smoother on a linear system (the rotation benchmark by default).
pub fn example_linear(cfg: &ExperimentConfig, out: &Path) -> Result<Summary, DemoError> {
    if matches!(cfg.system, SystemSpec::CubeRoot | SystemSpec::Scalar { .. }) {
        return Err(DemoError::WrongSystem { expected: "linear" });
    }
    run(cfg, out)
}

/// Interval filter and smoother on a scalar system (the cube-root benchmark by
/// default).
pub fn example_scalar(cfg: &ExperimentConfig, out: &Path) -> Result<Summary, DemoError> {
    if !matches!(cfg.system, SystemSpec::CubeRoot | SystemSpec::Scalar { .. }) {
        return Err(DemoError::WrongSystem { expected: "scalar" });
    }
    run(cfg, out)
}

/// Loads the config file and dispatches on its system kind. Output goes to
/// `out`, or to the configured `output_dir`.
pub fn example_from_file(config: &Path, out: Option<&Path>) -> Result<Summary, DemoError> {
    let cfg = ExperimentConfig::from_file(config)?;
    let out = out.unwrap_or(&cfg.output_dir);
    match cfg.system {
        SystemSpec::CubeRoot | SystemSpec::Scalar { .. } => example_scalar(&cfg, out),
        _ => example_linear(&cfg, out),
    }
}
