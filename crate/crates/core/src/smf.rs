//! Exact set-membership filter for linear systems with constrained-zonotopic
//! ranges.
//!
//! Prediction is `Φ ⟦x_k | y_{0:k}⟧ ⊕ Γ ⟦w⟧`; the measurement update keeps the
//! prior states `x` with `Ξ x ∈ {y} ⊕ Ψ ⟦-v⟧`, realized as a generalized
//! intersection. Both steps are exact, so the representation grows by the noise
//! generators and one block of measurement rows per step. Emptiness is never
//! checked here; see [`FilterState::is_consistent`].

use nalgebra::DVector;
use thiserror::Error;

use crate::cz::{ConstrainedZonotope, CzError};
use crate::model::{LinearSystem, ModelError};

#[derive(Debug, Error)]
pub enum FilterError {
    #[error(transparent)]
    Cz(#[from] CzError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("measurement {k} has {got} entries, expected {want}")]
    Measurement { k: usize, got: usize, want: usize },
    #[error("no measurements supplied")]
    NoMeasurements,
}

/// Prior `⟦x_k | y_{0:k-1}⟧` and posterior `⟦x_k | y_{0:k}⟧` at step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub k: usize,
    pub prior: ConstrainedZonotope,
    pub posterior: ConstrainedZonotope,
}

impl FilterState {
    /// False when the posterior is empty, i.e. the measurements contradict the
    /// model. Costs one LP.
    pub fn is_consistent(&self) -> Result<bool, CzError> {
        Ok(!self.posterior.is_empty()?)
    }
}

/// Prior range of step `k + 1` from the posterior of step `k`.
pub fn predict(
    posterior_prev: &ConstrainedZonotope,
    sys: &LinearSystem,
    k: usize,
) -> Result<ConstrainedZonotope, FilterError> {
    let m = sys.matrices(k)?;
    let noise = sys.w_range.linear_map(&m.gamma)?;
    Ok(posterior_prev.linear_map(&m.phi)?.minkowski_sum(&noise)?)
}

/// Measurement set `{y} ⊕ Ψ⟦-v⟧ = Z(-Ψ G_v, y - Ψ c_v, A_v, b_v, h_v)`.
pub fn measurement_set(
    y: &DVector<f64>,
    sys: &LinearSystem,
    k: usize,
) -> Result<ConstrainedZonotope, FilterError> {
    let m = sys.matrices(k)?;
    if y.len() != m.xi.nrows() {
        return Err(FilterError::Measurement {
            k,
            got: y.len(),
            want: m.xi.nrows(),
        });
    }
    let v = &sys.v_range;
    Ok(ConstrainedZonotope::new(
        -(&m.psi * v.generators()),
        y - &m.psi * v.center(),
        v.constraints().clone(),
        v.rhs().clone(),
        v.half_widths().clone(),
    )?)
}

pub fn update(
    prior: &ConstrainedZonotope,
    y: &DVector<f64>,
    sys: &LinearSystem,
    k: usize,
) -> Result<ConstrainedZonotope, FilterError> {
    let m = sys.matrices(k)?;
    let meas = measurement_set(y, sys, k)?;
    Ok(prior.generalized_intersection(&m.xi, &meas)?)
}

/// Filters `y_0..y_T`; the first update is applied directly to `⟦x_0⟧`.
pub fn run_filter(
    sys: &LinearSystem,
    measurements: &[DVector<f64>],
) -> Result<Vec<FilterState>, FilterError> {
    if measurements.is_empty() {
        return Err(FilterError::NoMeasurements);
    }
    let mut out: Vec<FilterState> = Vec::with_capacity(measurements.len());
    for (k, y) in measurements.iter().enumerate() {
        let prior = match out.last() {
            None => sys.x0_range.clone(),
            Some(prev) => predict(&prev.posterior, sys, k - 1)?,
        };
        let posterior = update(&prior, y, sys, k)?;
        out.push(FilterState { k, prior, posterior });
    }
    Ok(out)
}
