//! Kalman filter and Rauch–Tung–Striebel smoother used as the stochastic
//! baseline.
//!
//! The noises are modelled as Gaussian with means at the centers of the
//! set-valued ranges and covariances `Q = Γ q Γᵀ` (process) and `R = r Ψ Ψᵀ`
//! (measurement), so a scalar `q` and `r` parameterize the whole filter.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{LinearSystem, ModelError, Trajectory};

/// Added to a singular predicted covariance before inverting it in the smoother.
pub const SMOOTHER_REGULARIZATION: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum RtsError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("innovation covariance is singular at step {k}")]
    SingularInnovation { k: usize },
    #[error("smoother needs a complete filter output")]
    Incomplete,
    #[error("empty tuning grid")]
    EmptyGrid,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("csv export failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RtsConfig {
    pub q: f64,
    pub r: f64,
    pub m0: DVector<f64>,
    pub p0: DMatrix<f64>,
}

impl RtsConfig {
    /// `m0 = 0`, `P0 = I` in dimension `n`.
    pub fn new(q: f64, r: f64, n: usize) -> Result<Self, RtsError> {
        let cfg = Self {
            q,
            r,
            m0: DVector::zeros(n),
            p0: DMatrix::identity(n, n),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RtsError> {
        if !(self.q >= 0.0 && self.q.is_finite()) || !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(RtsError::Config(format!(
                "q = {}, r = {} must be finite and nonnegative",
                self.q, self.r
            )));
        }
        let n = self.m0.len();
        if self.p0.shape() != (n, n) {
            return Err(RtsError::Config(format!(
                "P0 is {:?}, expected {n}x{n}",
                self.p0.shape()
            )));
        }
        if (&self.p0 - self.p0.transpose()).amax() > 1e-12 * (1.0 + self.p0.amax()) {
            return Err(RtsError::Config("P0 is not symmetric".into()));
        }
        if n > 0 && self.p0.clone().symmetric_eigenvalues().min() < -1e-12 {
            return Err(RtsError::Config("P0 is not positive semidefinite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEstimate {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// `predicted[k]` is the estimate of `x_k` before `y_k` (so `predicted[0]` is the
/// prior), `filtered[k]` after it.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanOutput {
    pub predicted: Vec<GaussianEstimate>,
    pub filtered: Vec<GaussianEstimate>,
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let t = p.transpose();
    *p += t;
    *p *= 0.5;
}

pub fn kalman_filter(
    sys: &LinearSystem,
    measurements: &[DVector<f64>],
    cfg: &RtsConfig,
) -> Result<KalmanOutput, RtsError> {
    cfg.validate()?;
    let n = sys.state_dim();
    if cfg.m0.len() != n {
        return Err(RtsError::Config(format!(
            "initial mean has {} entries, state dimension is {n}",
            cfg.m0.len()
        )));
    }
    let w_mean = sys.w_range.center();
    let v_mean = sys.v_range.center();
    let mut out = KalmanOutput {
        predicted: Vec::with_capacity(measurements.len()),
        filtered: Vec::with_capacity(measurements.len()),
    };
    let mut pred = GaussianEstimate {
        mean: cfg.m0.clone(),
        covariance: cfg.p0.clone(),
    };
    for (k, y) in measurements.iter().enumerate() {
        let mats = sys.matrices(k)?;
        if k > 0 {
            let prev = &out.filtered[k - 1];
            let step = sys.matrices(k - 1)?;
            let q = &step.gamma * step.gamma.transpose() * cfg.q;
            let mut p = &step.phi * &prev.covariance * step.phi.transpose() + q;
            symmetrize(&mut p);
            pred = GaussianEstimate {
                mean: &step.phi * &prev.mean + &step.gamma * w_mean,
                covariance: p,
            };
        }
        let (h, psi) = (&mats.xi, &mats.psi);
        if y.len() != h.nrows() {
            return Err(ModelError::Dimension(format!(
                "measurement {k} has {} entries, expected {}",
                y.len(),
                h.nrows()
            ))
            .into());
        }
        let r = psi * psi.transpose() * cfg.r;
        let innovation = y - h * &pred.mean - psi * v_mean;
        let s = h * &pred.covariance * h.transpose() + &r;
        let s_inv = s
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .or_else(|| s.try_inverse())
            .ok_or(RtsError::SingularInnovation { k })?;
        let gain = &pred.covariance * h.transpose() * s_inv;
        let i_kh = DMatrix::identity(n, n) - &gain * h;
        let mut p = &i_kh * &pred.covariance * i_kh.transpose() + &gain * r * gain.transpose();
        symmetrize(&mut p);
        out.filtered.push(GaussianEstimate {
            mean: &pred.mean + gain * innovation,
            covariance: p,
        });
        out.predicted.push(pred.clone());
    }
    Ok(out)
}

/// Backward pass; `smoothed[T] = filtered[T]`.
pub fn rts_smooth(out: &KalmanOutput, sys: &LinearSystem) -> Result<Vec<GaussianEstimate>, RtsError> {
    let len = out.filtered.len();
    if len == 0 || out.predicted.len() != len {
        return Err(RtsError::Incomplete);
    }
    let mut smoothed = out.filtered.clone();
    for k in (0..len - 1).rev() {
        let phi = &sys.matrices(k)?.phi;
        let filt = &out.filtered[k];
        let pred = &out.predicted[k + 1];
        let n = pred.covariance.nrows();
        let inv = match pred.covariance.clone().try_inverse() {
            Some(inv) if inv.iter().all(|v| v.is_finite()) => inv,
            _ => {
                log::warn!("predicted covariance at step {} is singular; regularizing", k + 1);
                (&pred.covariance + DMatrix::identity(n, n) * SMOOTHER_REGULARIZATION)
                    .try_inverse()
                    .ok_or(RtsError::SingularInnovation { k: k + 1 })?
            }
        };
        let gain = &filt.covariance * phi.transpose() * inv;
        let next = &smoothed[k + 1];
        let mean = &filt.mean + &gain * (&next.mean - &pred.mean);
        let mut cov =
            &filt.covariance + &gain * (&next.covariance - &pred.covariance) * gain.transpose();
        symmetrize(&mut cov);
        smoothed[k] = GaussianEstimate {
            mean,
            covariance: cov,
        };
    }
    Ok(smoothed)
}

/// Filter + smoother means for one trajectory.
pub fn smoothed_means(
    sys: &LinearSystem,
    traj: &Trajectory,
    cfg: &RtsConfig,
) -> Result<Vec<DVector<f64>>, RtsError> {
    let out = kalman_filter(sys, &traj.measurements, cfg)?;
    Ok(rts_smooth(&out, sys)?.into_iter().map(|e| e.mean).collect())
}

/// Mean over trials and over `k ∈ [0, T]` of `‖m_k − x_k‖²` for the smoothed means.
pub fn average_smoothed_mse(
    sys: &LinearSystem,
    trajectories: &[Trajectory],
    cfg: &RtsConfig,
) -> Result<f64, RtsError> {
    let mut total = 0.0;
    let mut count = 0usize;
    for traj in trajectories {
        for (m, x) in smoothed_means(sys, traj, cfg)?.iter().zip(&traj.states) {
            total += (m - x).norm_squared();
            count += 1;
        }
    }
    Ok(total / count.max(1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub q: f64,
    pub r: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best: GridPoint,
    /// Row-major over `(q, r)`: all `r` for the first `q`, then the next `q`.
    pub table: Vec<GridPoint>,
}

/// Evaluates every `(q, r)` pair on the same trajectories and returns the pair
/// with the smallest average smoothed MSE (first one on ties).
pub fn tune_grid(
    sys: &LinearSystem,
    trajectories: &[Trajectory],
    q_grid: &[f64],
    r_grid: &[f64],
) -> Result<TuneResult, RtsError> {
    if q_grid.is_empty() || r_grid.is_empty() || trajectories.is_empty() {
        return Err(RtsError::EmptyGrid);
    }
    let n = sys.state_dim();
    let pairs: Vec<(f64, f64)> = q_grid
        .iter()
        .flat_map(|&q| r_grid.iter().map(move |&r| (q, r)))
        .collect();
    let table = pairs
        .par_iter()
        .map(|&(q, r)| {
            let cfg = RtsConfig::new(q, r, n)?;
            Ok(GridPoint {
                q,
                r,
                mse: average_smoothed_mse(sys, trajectories, &cfg)?,
            })
        })
        .collect::<Result<Vec<_>, RtsError>>()?;
    let best = table
        .iter()
        .copied()
        .fold(None::<GridPoint>, |acc, p| match acc {
            Some(a) if a.mse <= p.mse => Some(a),
            _ => Some(p),
        })
        .expect("nonempty table");
    Ok(TuneResult { best, table })
}

/// `lo, lo + step, …` up to `hi` (inclusive within half a step).
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if step.is_nan() || step <= 0.0 || hi < lo {
        return vec![lo];
    }
    let count = ((hi - lo) / step + 0.5).floor() as usize;
    (0..=count).map(|i| lo + step * i as f64).collect()
}

/// Writes `q,r,mse` rows after the versioned header comment.
pub fn write_grid_csv<W: Write>(table: &[GridPoint], mut out: W) -> Result<(), RtsError> {
    writeln!(out, "{}", crate::CSV_HEADER)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["q", "r", "mse"])?;
    for p in table {
        w.write_record([p.q.to_string(), p.r.to_string(), p.mse.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
