//! Monte-Carlo experiment driver: configuration, per-trial records, aggregate
//! metrics and CSV output.
//!
//! Trials run in parallel, each on its own RNG substream of the base seed, and
//! are collected in trial order, so a given configuration always produces the
//! same files byte for byte.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cz::{ConstrainedZonotope, CzError, IntervalBox};
use crate::interval1d::{self, Interval, Interval1dError, MonotoneMap};
use crate::model::{self, presets, LinearSystem, ModelError, ScalarAffineSystem, StepMatrices, Trajectory};
use crate::oracle::{self, CellRule, OracleError};
use crate::rts::{self, GridPoint, RtsConfig, RtsError};
use crate::smf::{self, FilterError};
use crate::sms::{self, SmootherError};

/// Trial count used by `--full-scale`.
pub const FULL_SCALE_TRIALS: usize = 5000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("trial {trial} (seed {seed}): estimate at step {k} is empty; data inconsistent with the model")]
    Inconsistent { trial: u64, seed: u64, k: usize },
    #[error("{0}")]
    Unsupported(String),
    #[error("length mismatch: {0}")]
    Length(String),
    #[error(transparent)]
    Cz(#[from] CzError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Interval(#[from] Interval1dError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Smoother(#[from] SmootherError),
    #[error(transparent)]
    Rts(#[from] RtsError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn invalid(field: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Configuration

/// Box given by its corner vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxSpec {
    fn to_box(&self, field: &str) -> Result<IntervalBox, HarnessError> {
        IntervalBox::from_slices(&self.lower, &self.upper).map_err(|e| invalid(field, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    CubeRootPlusIdentity,
    Identity,
    Affine { a: f64, b: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// The two-state rotation benchmark of [`presets::rotation_system`].
    Rotation,
    /// The scalar benchmark of [`presets::cube_root_system`].
    CubeRoot,
    /// Time-invariant linear system with box-shaped ranges; matrices row by row.
    Linear {
        phi: Vec<Vec<f64>>,
        gamma: Vec<Vec<f64>>,
        xi: Vec<Vec<f64>>,
        psi: Vec<Vec<f64>>,
        w: BoxSpec,
        v: BoxSpec,
        x0: BoxSpec,
    },
    /// `x⁺ = η(x) + w`, `y = gain · x + v` with interval ranges `[lo, hi]`.
    Scalar {
        eta: MapSpec,
        gain: f64,
        w: [f64; 2],
        v: [f64; 2],
        x0: [f64; 2],
    },
}

/// A concrete system built from a [`SystemSpec`].
#[derive(Debug, Clone)]
pub enum System {
    Linear(LinearSystem),
    Scalar(ScalarAffineSystem),
}

fn matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>, HarnessError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(invalid(field, "expected a nonempty rectangular array of rows"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn interval(pair: [f64; 2], field: &str) -> Result<Interval, HarnessError> {
    Interval::new(pair[0], pair[1]).map_err(|e| invalid(field, e.to_string()))
}

impl SystemSpec {
    pub fn build(&self) -> Result<System, HarnessError> {
        Ok(match self {
            SystemSpec::Rotation => System::Linear(presets::rotation_system()),
            SystemSpec::CubeRoot => System::Scalar(presets::cube_root_system()),
            SystemSpec::Linear {
                phi,
                gamma,
                xi,
                psi,
                w,
                v,
                x0,
            } => {
                let step = StepMatrices {
                    phi: matrix(phi, "system.phi")?,
                    gamma: matrix(gamma, "system.gamma")?,
                    xi: matrix(xi, "system.xi")?,
                    psi: matrix(psi, "system.psi")?,
                };
                let sys = LinearSystem::new(
                    step,
                    w.to_box("system.w")?.to_zonotope(),
                    v.to_box("system.v")?.to_zonotope(),
                    x0.to_box("system.x0")?.to_zonotope(),
                )
                .map_err(|e| invalid("system", e.to_string()))?;
                System::Linear(sys)
            }
            SystemSpec::Scalar { eta, gain, w, v, x0 } => {
                let map = match eta {
                    MapSpec::CubeRootPlusIdentity => MonotoneMap::cube_root_plus_identity(),
                    MapSpec::Identity => MonotoneMap::identity(),
                    MapSpec::Affine { a, b } => {
                        MonotoneMap::affine(*a, *b).map_err(|e| invalid("system.eta", e.to_string()))?
                    }
                };
                let sys = ScalarAffineSystem::new(
                    map,
                    *gain,
                    interval(*w, "system.w")?,
                    interval(*v, "system.v")?,
                    interval(*x0, "system.x0")?,
                )
                .map_err(|e| invalid("system.gain", e.to_string()))?;
                System::Scalar(sys)
            }
        })
    }
}

/// Which backward recursion the linear experiments use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmootherRoute {
    /// [`sms::run_smoother_shared`]: constant-size sets, suited to long horizons.
    Shared,
    /// [`sms::run_smoother`]: the step-by-step recursion; sets grow quadratically.
    Recursive,
}

/// `lo, lo + step, …, hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridRange {
    pub fn values(&self) -> Vec<f64> {
        rts::linear_grid(self.lo, self.hi, self.step)
    }

    fn validate(&self, field: &str) -> Result<(), HarnessError> {
        if !(self.lo >= 0.0 && self.hi >= self.lo && self.step > 0.0 && self.hi.is_finite()) {
            return Err(invalid(field, "need 0 <= lo <= hi < inf and step > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RtsSettings {
    /// Fixed parameter pair reported next to the tuned one.
    pub q: f64,
    pub r: f64,
    pub q_grid: GridRange,
    pub r_grid: GridRange,
}

impl Default for RtsSettings {
    fn default() -> Self {
        let grid = GridRange {
            lo: 0.01,
            hi: 0.15,
            step: 0.005,
        };
        Self {
            q: 0.076,
            r: 0.036,
            q_grid: grid,
            r_grid: grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSettings {
    pub delta: f64,
    pub horizon: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            delta: 0.05,
            horizon: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub smoother: SmootherRoute,
    /// Inclusive step range written to `hulls_trial0.csv`.
    pub hull_window: [usize; 2],
    pub oracle: OracleSettings,
    pub rts: RtsSettings,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemSpec::Rotation,
            horizon: 50,
            trials: 200,
            seed: 20240601,
            smoother: SmootherRoute::Shared,
            hull_window: [0, 10],
            oracle: OracleSettings::default(),
            rts: RtsSettings::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Parses JSON; syntax and type errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.hull_window[0] > self.hull_window[1] {
            return Err(invalid("hull_window", "start exceeds end"));
        }
        if !(self.oracle.delta > 0.0 && self.oracle.delta.is_finite()) {
            return Err(invalid("oracle.delta", "must be positive"));
        }
        if !(self.rts.q >= 0.0 && self.rts.r >= 0.0) {
            return Err(invalid("rts", "q and r must be nonnegative"));
        }
        self.rts.q_grid.validate("rts.q_grid")?;
        self.rts.r_grid.validate("rts.r_grid")?;
        self.system.build()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Records and metrics

/// Center of the interval hull.
pub fn point_estimate(z: &ConstrainedZonotope) -> Result<DVector<f64>, CzError> {
    Ok(z.interval_hull()?.center())
}

/// Per-k mean over trials of `‖estimate − truth‖²`, and the mean of that series.
pub fn mse_series(
    estimates: &[Vec<DVector<f64>>],
    truths: &[Vec<DVector<f64>>],
) -> Result<(Vec<f64>, f64), HarnessError> {
    if estimates.len() != truths.len() || estimates.is_empty() {
        return Err(HarnessError::Length(format!(
            "{} estimate series vs {} truth series",
            estimates.len(),
            truths.len()
        )));
    }
    let len = truths[0].len();
    let mut per_k = vec![0.0; len];
    for (est, tru) in estimates.iter().zip(truths) {
        if est.len() != len || tru.len() != len {
            return Err(HarnessError::Length("series of different lengths".into()));
        }
        for (k, (e, t)) in est.iter().zip(tru).enumerate() {
            if e.len() != t.len() {
                return Err(HarnessError::Length(format!("dimension mismatch at step {k}")));
            }
            per_k[k] += (e - t).norm_squared();
        }
    }
    let trials = estimates.len() as f64;
    per_k.iter_mut().for_each(|v| *v /= trials);
    let overall = per_k.iter().sum::<f64>() / len.max(1) as f64;
    Ok((per_k, overall))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub state: DVector<f64>,
    pub filtered: IntervalBox,
    pub smoothed: IntervalBox,
    /// Squared error of the smoothed Gaussian mean, when the baseline ran.
    pub rts_sq_err: Option<f64>,
}

impl StepRecord {
    pub fn filtered_diameter(&self) -> f64 {
        self.filtered.max_width()
    }

    pub fn smoothed_diameter(&self) -> f64 {
        self.smoothed.max_width()
    }

    pub fn filtered_sq_err(&self) -> f64 {
        (self.filtered.center() - &self.state).norm_squared()
    }

    pub fn smoothed_sq_err(&self) -> f64 {
        (self.smoothed.center() - &self.state).norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub steps: Vec<StepRecord>,
}

/// Per-k averages over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub k: usize,
    pub filtered_diameter: f64,
    pub smoothed_diameter: f64,
    pub mse_filtered_center: f64,
    pub mse_smoothed_center: f64,
    pub mse_rts: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub trials: Vec<TrialRecord>,
}

impl RunRecord {
    pub fn horizon(&self) -> usize {
        self.trials[0].steps.len() - 1
    }

    /// Averages in trial order (fixed reduction order).
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let n = self.trials.len() as f64;
        (0..=self.horizon())
            .map(|k| {
                let steps = self.trials.iter().map(|t| &t.steps[k]);
                let mean = |f: &dyn Fn(&StepRecord) -> f64| steps.clone().map(f).sum::<f64>() / n;
                let rts = steps
                    .clone()
                    .map(|s| s.rts_sq_err)
                    .collect::<Option<Vec<f64>>>()
                    .map(|v| v.iter().sum::<f64>() / n);
                Aggregate {
                    k,
                    filtered_diameter: mean(&StepRecord::filtered_diameter),
                    smoothed_diameter: mean(&StepRecord::smoothed_diameter),
                    mse_filtered_center: mean(&StepRecord::filtered_sq_err),
                    mse_smoothed_center: mean(&StepRecord::smoothed_sq_err),
                    mse_rts: rts,
                }
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Trials

fn interval_box(i: &Interval) -> IntervalBox {
    IntervalBox {
        lower: DVector::from_element(1, i.lo()),
        upper: DVector::from_element(1, i.hi()),
    }
}

fn empty_to_inconsistent(e: CzError, traj: &Trajectory, k: usize) -> HarnessError {
    match e {
        CzError::Empty => HarnessError::Inconsistent {
            trial: traj.trial,
            seed: traj.seed,
            k,
        },
        other => other.into(),
    }
}

/// Filter and smoother hulls of one simulated linear trajectory.
pub fn linear_trial(
    sys: &LinearSystem,
    traj: &Trajectory,
    route: SmootherRoute,
    rts_cfg: Option<&RtsConfig>,
) -> Result<TrialRecord, HarnessError> {
    let filtered = smf::run_filter(sys, &traj.measurements)?;
    let smoothed = match route {
        SmootherRoute::Shared => sms::run_smoother_shared(&filtered)?,
        SmootherRoute::Recursive => sms::run_smoother(&filtered, sys)?,
    };
    let mut filtered_hulls = Vec::with_capacity(filtered.len());
    for s in &filtered {
        filtered_hulls.push(
            s.posterior
                .interval_hull()
                .map_err(|e| empty_to_inconsistent(e, traj, s.k))?,
        );
    }
    // All smoothed sets share the final factor polytope, so emptiness shows up
    // as an inconsistent final step.
    let smoothed_hulls = ConstrainedZonotope::interval_hulls(&smoothed.smoothed)
        .map_err(|e| empty_to_inconsistent(e, traj, traj.horizon()))?;
    let rts_means = rts_cfg
        .map(|cfg| rts::smoothed_means(sys, traj, cfg))
        .transpose()?;
    let steps = (0..filtered.len())
        .map(|k| StepRecord {
            k,
            state: traj.states[k].clone(),
            filtered: filtered_hulls[k].clone(),
            smoothed: smoothed_hulls[k].clone(),
            rts_sq_err: rts_means.as_ref().map(|m| (&m[k] - &traj.states[k]).norm_squared()),
        })
        .collect();
    Ok(TrialRecord {
        trial: traj.trial,
        steps,
    })
}

pub fn scalar_trial(sys: &ScalarAffineSystem, traj: &Trajectory) -> Result<TrialRecord, HarnessError> {
    let ys = traj.scalar_measurements();
    let inconsistent = |e: Interval1dError| match e {
        Interval1dError::EmptyRange { k } => HarnessError::Inconsistent {
            trial: traj.trial,
            seed: traj.seed,
            k,
        },
        other => other.into(),
    };
    let filtered = interval1d::run_filter_1d(sys, &ys).map_err(inconsistent)?;
    let smoothed = interval1d::run_smoother_1d(&filtered, sys).map_err(inconsistent)?;
    let steps = (0..filtered.len())
        .map(|k| StepRecord {
            k,
            state: traj.states[k].clone(),
            filtered: interval_box(&filtered[k].posterior),
            smoothed: interval_box(&smoothed[k]),
            rts_sq_err: None,
        })
        .collect();
    Ok(TrialRecord {
        trial: traj.trial,
        steps,
    })
}

pub fn simulate(sys: &System, horizon: usize, seed: u64, trial: u64) -> Result<Trajectory, HarnessError> {
    Ok(match sys {
        System::Linear(s) => model::simulate_linear_trial(s, horizon, seed, trial)?,
        System::Scalar(s) => model::simulate_scalar_trial(s, horizon, seed, trial)?,
    })
}

/// Runs `cfg.trials` trials of the configured system. With `rts_cfg` set (linear
/// systems only) the Gaussian baseline runs on the same trajectories.
pub fn run_trials(cfg: &ExperimentConfig, rts_cfg: Option<&RtsConfig>) -> Result<RunRecord, HarnessError> {
    cfg.validate()?;
    let sys = cfg.system.build()?;
    if rts_cfg.is_some() && matches!(sys, System::Scalar(_)) {
        return Err(HarnessError::Unsupported(
            "the Gaussian baseline needs a linear system".into(),
        ));
    }
    let trials = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let traj = simulate(&sys, cfg.horizon, cfg.seed, trial)?;
            match &sys {
                System::Linear(s) => linear_trial(s, &traj, cfg.smoother, rts_cfg),
                System::Scalar(s) => scalar_trial(s, &traj),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RunRecord {
        seed: cfg.seed,
        trials,
    })
}

// ---------------------------------------------------------------------------
// CSV output

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", crate::CSV_HEADER).map_err(io_err(&path))?;
    Ok(w)
}

fn fmt(v: f64) -> String {
    v.to_string()
}

pub fn write_diameters<W: Write>(aggs: &[Aggregate], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "avg_filtered_diam", "avg_smoothed_diam"])?;
    for a in aggs {
        w.write_record([a.k.to_string(), fmt(a.filtered_diameter), fmt(a.smoothed_diameter)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `mse_rts_fixed` and `mse_rts_tuned` are left empty when the baseline did not run.
pub fn write_mse<W: Write>(
    aggs: &[Aggregate],
    tuned: Option<&[Aggregate]>,
    out: W,
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "mse_smf_center", "mse_sms_center", "mse_rts_fixed", "mse_rts_tuned"])?;
    for (i, a) in aggs.iter().enumerate() {
        let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
        w.write_record([
            a.k.to_string(),
            fmt(a.mse_filtered_center),
            fmt(a.mse_smoothed_center),
            opt(a.mse_rts),
            opt(tuned.and_then(|t| t[i].mse_rts)),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Filtered and smoothed hulls of one trial, one row per step and estimate.
pub fn write_hulls<W: Write>(
    trial: &TrialRecord,
    window: [usize; 2],
    out: W,
) -> Result<(), HarnessError> {
    let n = trial.steps[0].state.len();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string(), "estimate".to_string()];
    for i in 1..=n {
        header.push(format!("lo{i}"));
        header.push(format!("hi{i}"));
    }
    for i in 1..=n {
        header.push(format!("x{i}"));
    }
    w.write_record(&header)?;
    for s in trial.steps.iter().filter(|s| s.k >= window[0] && s.k <= window[1]) {
        for (label, b) in [("filtered", &s.filtered), ("smoothed", &s.smoothed)] {
            let mut row = vec![s.k.to_string(), label.to_string()];
            for i in 0..n {
                row.push(fmt(b.lower[i]));
                row.push(fmt(b.upper[i]));
            }
            row.extend(s.state.iter().map(|v| fmt(*v)));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Tasks

/// What a run computes and writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// `diameters.csv` (filtered only is meaningful) and `hulls_trial0.csv`.
    Filter,
    /// Adds the smoothed diameters and `mse.csv`.
    Smooth,
    /// As `Smooth`, plus the Gaussian baseline at the fixed and the tuned
    /// parameters and `rts_grid.csv`.
    CompareRts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub record: RunRecord,
    pub aggregates: Vec<Aggregate>,
    pub tuned: Option<GridPoint>,
    pub files: Vec<PathBuf>,
}

impl Summary {
    /// Mean over `k` of the smoothed hull-center MSE.
    pub fn mean_mse_smoothed(&self) -> f64 {
        self.aggregates.iter().map(|a| a.mse_smoothed_center).sum::<f64>() / self.aggregates.len() as f64
    }
}

fn trajectories(cfg: &ExperimentConfig, sys: &LinearSystem) -> Result<Vec<Trajectory>, HarnessError> {
    (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| Ok(model::simulate_linear_trial(sys, cfg.horizon, cfg.seed, t)?))
        .collect()
}

fn linear_system(cfg: &ExperimentConfig) -> Result<LinearSystem, HarnessError> {
    match cfg.system.build()? {
        System::Linear(s) => Ok(s),
        System::Scalar(_) => Err(HarnessError::Unsupported(
            "the Gaussian baseline needs a linear system".into(),
        )),
    }
}

/// Grid search of the baseline parameters on the configured trajectories;
/// writes `rts_grid.csv` when `out` is given.
pub fn tune_rts(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<rts::TuneResult, HarnessError> {
    cfg.validate()?;
    let sys = linear_system(cfg)?;
    let trajs = trajectories(cfg, &sys)?;
    let res = rts::tune_grid(&sys, &trajs, &cfg.rts.q_grid.values(), &cfg.rts.r_grid.values())?;
    if let Some(dir) = out {
        let path = dir.join("rts_grid.csv");
        let mut w = create(dir, "rts_grid.csv")?;
        let mut csvw = csv::Writer::from_writer(&mut w);
        csvw.write_record(["q", "r", "mse"])?;
        for p in &res.table {
            csvw.write_record([fmt(p.q), fmt(p.r), fmt(p.mse)])?;
        }
        csvw.flush().map_err(io_err(&path))?;
    }
    Ok(res)
}

pub fn run_experiment(cfg: &ExperimentConfig, task: Task, out: &Path) -> Result<Summary, HarnessError> {
    cfg.validate()?;
    let mut files = Vec::new();
    let (record, tuned_record, tuned) = match task {
        Task::Filter | Task::Smooth => (run_trials(cfg, None)?, None, None),
        Task::CompareRts => {
            let n = linear_system(cfg)?.state_dim();
            let fixed = RtsConfig::new(cfg.rts.q, cfg.rts.r, n)?;
            let best = tune_rts(cfg, Some(out))?.best;
            files.push(out.join("rts_grid.csv"));
            let tuned_cfg = RtsConfig::new(best.q, best.r, n)?;
            (
                run_trials(cfg, Some(&fixed))?,
                Some(run_trials(cfg, Some(&tuned_cfg))?),
                Some(best),
            )
        }
    };
    let aggregates = record.aggregates();
    let tuned_aggs = tuned_record.as_ref().map(RunRecord::aggregates);

    let mut w = create(out, "diameters.csv")?;
    write_diameters(&aggregates, &mut w)?;
    files.push(out.join("diameters.csv"));

    let mut w = create(out, "hulls_trial0.csv")?;
    write_hulls(&record.trials[0], cfg.hull_window, &mut w)?;
    files.push(out.join("hulls_trial0.csv"));

    if task != Task::Filter {
        let mut w = create(out, "mse.csv")?;
        write_mse(&aggregates, tuned_aggs.as_deref(), &mut w)?;
        files.push(out.join("mse.csv"));
    }
    Ok(Summary {
        record,
        aggregates,
        tuned,
        files,
    })
}

/// Writes the filtered and smoothed sets of trial 0 as one JSON record per
/// line (`sets_trial0.jsonl`, fields `k`, `filtered`, `smoothed`). Linear
/// systems only.
pub fn write_sets(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf, HarnessError> {
    cfg.validate()?;
    let sys = match cfg.system.build()? {
        System::Linear(s) => s,
        System::Scalar(_) => {
            return Err(HarnessError::Unsupported(
                "set records are only written for linear systems".into(),
            ))
        }
    };
    let traj = model::simulate_linear_trial(&sys, cfg.horizon, cfg.seed, 0)?;
    let filtered = smf::run_filter(&sys, &traj.measurements)?;
    let smoothed = match cfg.smoother {
        SmootherRoute::Shared => sms::run_smoother_shared(&filtered)?,
        SmootherRoute::Recursive => sms::run_smoother(&filtered, &sys)?,
    };
    fs::create_dir_all(out).map_err(io_err(out))?;
    let path = out.join("sets_trial0.jsonl");
    let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    for (f, z) in filtered.iter().zip(&smoothed.smoothed) {
        writeln!(
            w,
            "{{\"k\":{},\"filtered\":{},\"smoothed\":{}}}",
            f.k,
            f.posterior.to_json(),
            z.to_json()
        )
        .map_err(io_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(path)
}

/// Per-step comparison between the set estimates and the lattice oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    pub k: usize,
    pub exact_filtered: IntervalBox,
    pub grid_filtered: IntervalBox,
    pub exact_smoothed: IntervalBox,
    pub grid_smoothed: IntervalBox,
}

fn face_gap(a: &IntervalBox, b: &IntervalBox) -> f64 {
    (&a.lower - &b.lower).amax().max((&a.upper - &b.upper).amax())
}

impl OracleComparison {
    pub fn filtered_gap(&self) -> f64 {
        face_gap(&self.exact_filtered, &self.grid_filtered)
    }

    pub fn smoothed_gap(&self) -> f64 {
        face_gap(&self.exact_smoothed, &self.grid_smoothed)
    }
}

/// Runs the oracle on trial 0 with the oracle horizon and spacing from the
/// config; writes `oracle_check.csv` when `out` is given.
pub fn oracle_check(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<OracleComparison>, HarnessError> {
    cfg.validate()?;
    let delta = cfg.oracle.delta;
    let horizon = cfg.oracle.horizon;
    let sys = cfg.system.build()?;
    let traj = simulate(&sys, horizon, cfg.seed, 0)?;
    let rows: Vec<OracleComparison> = match &sys {
        System::Linear(s) => {
            let filtered = smf::run_filter(s, &traj.measurements)?;
            let smoothed = sms::run_smoother(&filtered, s)?;
            let fh = filtered
                .iter()
                .map(|f| f.posterior.interval_hull())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| empty_to_inconsistent(e, &traj, 0))?;
            let sh = ConstrainedZonotope::interval_hulls(&smoothed.smoothed)?;
            let domain = oracle::oracle_domain(&fh, delta).expect("at least one step");
            let gf = oracle::grid_filter(s, &traj.measurements, &domain, delta, CellRule::Center)?;
            let gs = oracle::grid_smooth(&gf, s, CellRule::Center)?;
            (0..=horizon)
                .map(|k| OracleComparison {
                    k,
                    exact_filtered: fh[k].clone(),
                    grid_filtered: gf[k].hull().expect("nonempty"),
                    exact_smoothed: sh[k].clone(),
                    grid_smoothed: gs[k].hull().expect("nonempty"),
                })
                .collect()
        }
        System::Scalar(s) => {
            let rec = scalar_trial(s, &traj)?;
            let hulls: Vec<IntervalBox> = rec.steps.iter().map(|r| r.filtered.clone()).collect();
            let domain = oracle::oracle_domain(&hulls, delta).expect("at least one step");
            let domain = Interval::new(domain.lower[0], domain.upper[0])?;
            let ys = traj.scalar_measurements();
            let gf = oracle::grid_filter_1d(s, &ys, &domain, delta)?;
            let gs = oracle::grid_smooth_1d(&gf, s)?;
            rec.steps
                .iter()
                .map(|r| OracleComparison {
                    k: r.k,
                    exact_filtered: r.filtered.clone(),
                    grid_filtered: gf[r.k].hull().expect("nonempty"),
                    exact_smoothed: r.smoothed.clone(),
                    grid_smoothed: gs[r.k].hull().expect("nonempty"),
                })
                .collect()
        }
    };
    if let Some(dir) = out {
        let mut w = create(dir, "oracle_check.csv")?;
        let mut csvw = csv::Writer::from_writer(&mut w);
        csvw.write_record(["k", "delta", "filtered_gap", "smoothed_gap"])?;
        for r in &rows {
            csvw.write_record([r.k.to_string(), fmt(delta), fmt(r.filtered_gap()), fmt(r.smoothed_gap())])?;
        }
        csvw.flush().map_err(csv::Error::from)?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn default_config_is_the_rotation_benchmark() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg.system, SystemSpec::Rotation);
        let System::Linear(sys) = cfg.system.build().unwrap() else {
            panic!("expected a linear system");
        };
        assert_eq!(sys, presets::rotation_system());
        assert_eq!(
            sys.w_range.interval_hull().unwrap(),
            IntervalBox::cube(1, -1.0, 1.0).unwrap()
        );
        assert_eq!(
            sys.v_range.interval_hull().unwrap(),
            IntervalBox::cube(2, -1.0, 1.0).unwrap()
        );
    }

    #[test]
    fn config_errors_name_the_problem() {
        let err = ExperimentConfig::from_json("{\n  \"trials\": \"many\"\n}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = ExperimentConfig::from_json("{\"trials\": 0}").unwrap_err();
        assert!(err.to_string().contains("`trials`"), "{err}");
        let err = ExperimentConfig::from_json("{\"horizn\": 3}").unwrap_err();
        assert!(err.to_string().contains("horizn"), "{err}");
        let err = ExperimentConfig::from_json(
            r#"{"system": {"kind": "scalar", "eta": {"map": "identity"}, "gain": 0,
                "w": [-1, 1], "v": [-1, 1], "x0": [-1, 1]}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("system.gain"), "{err}");
    }

    #[test]
    fn point_estimate_examples() {
        let b = IntervalBox::from_slices(&[-1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(point_estimate(&b.to_zonotope()).unwrap(), dv(&[1.0, 3.0]));
        let p = dv(&[0.3, -0.7]);
        assert_eq!(point_estimate(&ConstrainedZonotope::point(p.clone())).unwrap(), p);
    }

    #[test]
    fn mse_examples() {
        let truths = vec![vec![dv(&[1.0]), dv(&[2.0])]];
        let (per_k, overall) = mse_series(&truths, &truths).unwrap();
        assert_eq!(per_k, vec![0.0, 0.0]);
        assert_eq!(overall, 0.0);
        let shifted = vec![vec![dv(&[1.5]), dv(&[2.5])]];
        let (per_k, overall) = mse_series(&shifted, &truths).unwrap();
        assert_eq!(per_k, vec![0.25, 0.25]);
        assert_eq!(overall, 0.25);
        assert!(mse_series(&shifted, &[]).is_err());
    }

    #[test]
    fn single_trial_horizon_zero() {
        let cfg = ExperimentConfig {
            horizon: 0,
            trials: 1,
            ..Default::default()
        };
        let rec = run_trials(&cfg, None).unwrap();
        assert_eq!(rec.trials.len(), 1);
        assert_eq!(rec.trials[0].steps.len(), 1);
        let s = &rec.trials[0].steps[0];
        assert_eq!(s.filtered, s.smoothed);
    }
}
