//! System definitions and ground-truth simulation.
//!
//! Linear systems follow
//!
//! ```text
//! x_{k+1} = Φ_k x_k + Γ_k w_k,     y_k = Ξ_k x_k + Ψ_k v_k
//! ```
//!
//! with constrained-zonotopic ranges `⟦x_0⟧`, `⟦w⟧`, `⟦v⟧`. Scalar systems are
//! the monotone class handled by [`crate::interval1d`]. Noise realizations are
//! drawn uniformly from their (box) ranges with a per-trial ChaCha substream, so
//! every trial is reproducible from `(seed, trial)` alone.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cz::{ConstrainedZonotope, CzError, IntervalBox};
use crate::interval1d::{Interval, Interval1dError, MonotoneMap};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no system matrices for step {k} (table has {len} entries)")]
    StepOutOfRange { k: usize, len: usize },
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Cz(#[from] CzError),
    #[error(transparent)]
    Interval(#[from] Interval1dError),
    #[error("csv export failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Independent random substream for one Monte-Carlo trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// `Φ`, `Γ`, `Ξ`, `Ψ` of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMatrices {
    pub phi: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub xi: DMatrix<f64>,
    pub psi: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum Dynamics {
    Invariant(StepMatrices),
    Varying(Vec<StepMatrices>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    dynamics: Dynamics,
    pub w_range: ConstrainedZonotope,
    pub v_range: ConstrainedZonotope,
    pub x0_range: ConstrainedZonotope,
}

impl LinearSystem {
    pub fn new(
        step: StepMatrices,
        w_range: ConstrainedZonotope,
        v_range: ConstrainedZonotope,
        x0_range: ConstrainedZonotope,
    ) -> Result<Self, ModelError> {
        check_step(&step, &w_range, &v_range, &x0_range)?;
        Ok(Self {
            dynamics: Dynamics::Invariant(step),
            w_range,
            v_range,
            x0_range,
        })
    }

    /// Time-varying system; `steps[k]` holds the measurement matrices of step `k`
    /// and the transition from `k` to `k + 1`.
    pub fn time_varying(
        steps: Vec<StepMatrices>,
        w_range: ConstrainedZonotope,
        v_range: ConstrainedZonotope,
        x0_range: ConstrainedZonotope,
    ) -> Result<Self, ModelError> {
        if steps.is_empty() {
            return Err(ModelError::Dimension("empty step table".into()));
        }
        for s in &steps {
            check_step(s, &w_range, &v_range, &x0_range)?;
        }
        Ok(Self {
            dynamics: Dynamics::Varying(steps),
            w_range,
            v_range,
            x0_range,
        })
    }

    pub fn matrices(&self, k: usize) -> Result<&StepMatrices, ModelError> {
        match &self.dynamics {
            Dynamics::Invariant(s) => Ok(s),
            Dynamics::Varying(v) => v.get(k).ok_or(ModelError::StepOutOfRange { k, len: v.len() }),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.x0_range.dim()
    }

    pub fn measurement_dim(&self) -> usize {
        self.matrices(0).map(|s| s.xi.nrows()).unwrap_or(0)
    }

    pub fn is_time_invariant(&self) -> bool {
        matches!(self.dynamics, Dynamics::Invariant(_))
    }
}

fn check_step(
    s: &StepMatrices,
    w: &ConstrainedZonotope,
    v: &ConstrainedZonotope,
    x0: &ConstrainedZonotope,
) -> Result<(), ModelError> {
    let n = x0.dim();
    let shape = |name: &str, m: &DMatrix<f64>, r: usize, c: usize| {
        if m.nrows() == r && m.ncols() == c {
            Ok(())
        } else {
            Err(ModelError::Dimension(format!(
                "{name} is {}x{}, expected {r}x{c}",
                m.nrows(),
                m.ncols()
            )))
        }
    };
    shape("Φ", &s.phi, n, n)?;
    shape("Γ", &s.gamma, n, w.dim())?;
    shape("Ξ", &s.xi, s.xi.nrows(), n)?;
    shape("Ψ", &s.psi, s.xi.nrows(), v.dim())?;
    Ok(())
}

/// `x_{k+1} = η(x_k) + w_k`, `y_k = α x_k + v_k` with interval ranges.
#[derive(Debug, Clone)]
pub struct ScalarAffineSystem {
    pub eta: MonotoneMap,
    pub meas_gain: f64,
    pub w_range: Interval,
    pub v_range: Interval,
    pub x0_range: Interval,
}

impl ScalarAffineSystem {
    pub fn new(
        eta: MonotoneMap,
        meas_gain: f64,
        w_range: Interval,
        v_range: Interval,
        x0_range: Interval,
    ) -> Result<Self, ModelError> {
        if meas_gain == 0.0 || !meas_gain.is_finite() {
            return Err(Interval1dError::ZeroGain.into());
        }
        Ok(Self {
            eta,
            meas_gain,
            w_range,
            v_range,
            x0_range,
        })
    }
}

/// Ready-made systems used by the experiments and examples.
pub mod presets {
    use super::*;

    /// Two-state rotation benchmark: `Φ = [[sin 1, cos 1], [-cos 1, sin 1]]`,
    /// `Γ = [0.5, 1]ᵀ`, `Ξ = [[0.5, 0.5], [1, 0.3]]`, `Ψ = I`,
    /// `⟦w⟧ = [-1, 1]`, `⟦v⟧ = [-1, 1]²`, and `⟦x_0⟧ = [-1, 1]²` by default.
    pub fn rotation_system() -> LinearSystem {
        let (s, c) = (1f64.sin(), 1f64.cos());
        let step = StepMatrices {
            phi: DMatrix::from_row_slice(2, 2, &[s, c, -c, s]),
            gamma: DMatrix::from_row_slice(2, 1, &[0.5, 1.0]),
            xi: DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 1.0, 0.3]),
            psi: DMatrix::identity(2, 2),
        };
        let boxed = |n, lo, hi| IntervalBox::cube(n, lo, hi).expect("valid cube").to_zonotope();
        LinearSystem::new(step, boxed(1, -1.0, 1.0), boxed(2, -1.0, 1.0), boxed(2, -1.0, 1.0))
            .expect("consistent dimensions")
    }

    /// `x⁺ = ∛x + x + w`, `y = 2x + v` with `⟦w⟧ = [-1, 1]`, `⟦v⟧ = [1, 3]`
    /// and `⟦x_0⟧ = [-1, 1]` by default.
    pub fn cube_root_system() -> ScalarAffineSystem {
        let iv = |a, b| Interval::new(a, b).expect("valid interval");
        ScalarAffineSystem::new(
            MonotoneMap::cube_root_plus_identity(),
            2.0,
            iv(-1.0, 1.0),
            iv(1.0, 3.0),
            iv(-1.0, 1.0),
        )
        .expect("nonzero gain")
    }
}

/// A simulated run: states `x_0..x_T`, measurements `y_0..y_T` and the noise
/// realizations that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub measurements: Vec<DVector<f64>>,
    pub process_noise: Vec<DVector<f64>>,
    pub measurement_noise: Vec<DVector<f64>>,
    pub seed: u64,
    pub trial: u64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    /// Scalar measurements (first component), for the 1-D estimators.
    pub fn scalar_measurements(&self) -> Vec<f64> {
        self.measurements.iter().map(|y| y[0]).collect()
    }

    /// CSV with columns `k, x1.., y1..`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ModelError> {
        let mut w = csv::Writer::from_writer(out);
        let nx = self.states[0].len();
        let ny = self.measurements[0].len();
        let mut header = vec!["k".to_string()];
        header.extend((1..=nx).map(|i| format!("x{i}")));
        header.extend((1..=ny).map(|i| format!("y{i}")));
        w.write_record(&header)?;
        for (k, (x, y)) in self.states.iter().zip(&self.measurements).enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(x.iter().map(|v| v.to_string()));
            row.extend(y.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Interval box of a range that is exactly an axis-aligned box (no constraints,
/// finite half-widths, one nonzero per generator column).
pub fn box_of(z: &ConstrainedZonotope) -> Result<IntervalBox, ModelError> {
    let unsupported =
        |why: &str| ModelError::Unsupported(format!("noise range must be a box for simulation: {why}"));
    if z.num_constraints() != 0 {
        return Err(unsupported("range has equality constraints"));
    }
    if z.half_widths().iter().any(|h| !h.is_finite()) {
        return Err(unsupported("range is unbounded"));
    }
    for col in z.generators().column_iter() {
        if col.iter().filter(|v| **v != 0.0).count() > 1 {
            return Err(unsupported("generators are not axis-aligned"));
        }
    }
    let mut half = DVector::zeros(z.dim());
    for (j, col) in z.generators().column_iter().enumerate() {
        for i in 0..z.dim() {
            half[i] += col[i].abs() * z.half_widths()[j];
        }
    }
    Ok(IntervalBox::new(z.center() - &half, z.center() + &half)?)
}

fn draw<R: Rng>(rng: &mut R, b: &IntervalBox) -> DVector<f64> {
    DVector::from_fn(b.dim(), |i, _| {
        let (lo, hi) = (b.lower[i], b.upper[i]);
        if lo < hi {
            rng.random_range(lo..=hi)
        } else {
            lo
        }
    })
}

pub fn simulate_linear(sys: &LinearSystem, horizon: usize, seed: u64) -> Result<Trajectory, ModelError> {
    simulate_linear_trial(sys, horizon, seed, 0)
}

/// Simulates `x_0..x_T` with uniform noises on substream `trial` of `seed`.
pub fn simulate_linear_trial(
    sys: &LinearSystem,
    horizon: usize,
    seed: u64,
    trial: u64,
) -> Result<Trajectory, ModelError> {
    let x0_box = box_of(&sys.x0_range)?;
    let w_box = box_of(&sys.w_range)?;
    let v_box = box_of(&sys.v_range)?;
    let mut rng = trial_rng(seed, trial);
    let mut x = draw(&mut rng, &x0_box);
    let mut traj = Trajectory {
        states: Vec::with_capacity(horizon + 1),
        measurements: Vec::with_capacity(horizon + 1),
        process_noise: Vec::with_capacity(horizon),
        measurement_noise: Vec::with_capacity(horizon + 1),
        seed,
        trial,
    };
    for k in 0..=horizon {
        let m = sys.matrices(k)?;
        let v = draw(&mut rng, &v_box);
        traj.measurements.push(&m.xi * &x + &m.psi * &v);
        traj.measurement_noise.push(v);
        traj.states.push(x.clone());
        if k < horizon {
            let w = draw(&mut rng, &w_box);
            x = &m.phi * &x + &m.gamma * &w;
            traj.process_noise.push(w);
        }
    }
    Ok(traj)
}

pub fn simulate_scalar(
    sys: &ScalarAffineSystem,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory, ModelError> {
    simulate_scalar_trial(sys, horizon, seed, 0)
}

pub fn simulate_scalar_trial(
    sys: &ScalarAffineSystem,
    horizon: usize,
    seed: u64,
    trial: u64,
) -> Result<Trajectory, ModelError> {
    let mut rng = trial_rng(seed, trial);
    let mut uniform = |r: &Interval| {
        if r.width() > 0.0 {
            rng.random_range(r.lo()..=r.hi())
        } else {
            r.lo()
        }
    };
    let one = |v: f64| DVector::from_element(1, v);
    let mut x = uniform(&sys.x0_range);
    let mut traj = Trajectory {
        states: Vec::with_capacity(horizon + 1),
        measurements: Vec::with_capacity(horizon + 1),
        process_noise: Vec::with_capacity(horizon),
        measurement_noise: Vec::with_capacity(horizon + 1),
        seed,
        trial,
    };
    for k in 0..=horizon {
        let v = uniform(&sys.v_range);
        traj.measurements.push(one(sys.meas_gain * x + v));
        traj.measurement_noise.push(one(v));
        traj.states.push(one(x));
        if k < horizon {
            let w = uniform(&sys.w_range);
            x = sys.eta.eval(x) + w;
            traj.process_noise.push(one(w));
        }
    }
    Ok(traj)
}
