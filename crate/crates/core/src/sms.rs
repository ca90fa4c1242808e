//! Exact fixed-interval set-membership smoother for linear systems.
//!
//! The smoothed range keeps the posterior states that can reach the next
//! smoothed range under some admissible process noise:
//!
//! ```text
//! ⟦x_k | y_{0:T}⟧ = { x ∈ ⟦x_k | y_{0:k}⟧ : Φ_k x ∈ Γ_k ⟦-w_k⟧ ⊕ ⟦x_{k+1} | y_{0:T}⟧ }
//! ```
//!
//! [`smooth_step`] evaluates this with one Minkowski sum and one generalized
//! intersection. The resulting quintuple has the block layout
//!
//! ```text
//! G̃_k = [Ĝ_k 0 0],  c̃_k = ĉ_k,  h̃_k = [ĥ_k; h̃_{k+1}; ĥ_w]
//! Ã_k = [Â_k 0 0; 0 Ã_{k+1} 0; 0 0 -Â_w; Φ_k Ĝ_k  -G̃_{k+1}  -Γ_k Ĝ_w]
//! b̃_k = [b̂_k; b̃_{k+1}; b̂_w; c̃_{k+1} - Γ_k ĉ_w - Φ_k ĉ_k]
//! ```
//!
//! because `-⟦w⟧` is written as `Z(Ĝ_w, -ĉ_w, -Â_w, b̂_w, ĥ_w)`. For the usual
//! centred box noise (`ĉ_w = 0`, no constraints) the two sign flips vanish.
//!
//! Each backward step stacks the complete representation of the next smoothed
//! range on top of the posterior, so [`run_smoother`] produces sets whose size
//! grows quadratically with the horizon. [`run_smoother_shared`] returns the
//! same sets in a representation of constant size by reusing the factor space of
//! the final posterior; see its documentation.

use thiserror::Error;

use crate::cz::{ConstrainedZonotope, CzError};
use crate::model::{LinearSystem, ModelError};
use crate::smf::FilterState;

#[derive(Debug, Error)]
pub enum SmootherError {
    #[error(transparent)]
    Cz(#[from] CzError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("filter output is empty")]
    NoFilterOutput,
    #[error("filter output is out of order at position {0}")]
    Misordered(usize),
    #[error("posterior {k} does not share the factor space of the final posterior")]
    NotNested { k: usize },
    #[error("smoothed range at step {k} is empty (data inconsistent with the model)")]
    EmptyRange { k: usize },
}

/// Smoothed ranges `⟦x_k | y_{0:T}⟧` for `k = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherOutput {
    pub smoothed: Vec<ConstrainedZonotope>,
}

impl SmootherOutput {
    pub fn horizon(&self) -> usize {
        self.smoothed.len() - 1
    }

    /// Fails with [`SmootherError::EmptyRange`] at the latest empty step.
    /// Costs one LP per step.
    pub fn check_nonempty(&self) -> Result<(), SmootherError> {
        for (k, z) in self.smoothed.iter().enumerate().rev() {
            if z.is_empty()? {
                return Err(SmootherError::EmptyRange { k });
            }
        }
        Ok(())
    }
}

/// One backward step: `⟦x_k | y_{0:T}⟧` from the posterior at `k` and the
/// smoothed range at `k + 1`.
pub fn smooth_step(
    posterior: &ConstrainedZonotope,
    smoothed_next: &ConstrainedZonotope,
    sys: &LinearSystem,
    k: usize,
) -> Result<ConstrainedZonotope, SmootherError> {
    let m = sys.matrices(k)?;
    let reachable = smoothed_next.minkowski_sum(&sys.w_range.reflect().linear_map(&m.gamma)?)?;
    Ok(posterior.generalized_intersection(&m.phi, &reachable)?)
}

fn check_order(filter_out: &[FilterState]) -> Result<(), SmootherError> {
    if filter_out.is_empty() {
        return Err(SmootherError::NoFilterOutput);
    }
    match filter_out.iter().enumerate().find(|(i, s)| s.k != *i) {
        Some((i, _)) => Err(SmootherError::Misordered(i)),
        None => Ok(()),
    }
}

/// Backward recursion `k = T-1 → 0` over the filter output, starting from the
/// final filter posterior.
pub fn run_smoother(
    filter_out: &[FilterState],
    sys: &LinearSystem,
) -> Result<SmootherOutput, SmootherError> {
    check_order(filter_out)?;
    let t = filter_out.len() - 1;
    let mut smoothed = vec![filter_out[t].posterior.clone(); t + 1];
    for k in (0..t).rev() {
        smoothed[k] = smooth_step(&filter_out[k].posterior, &smoothed[k + 1], sys, k)?;
    }
    Ok(SmootherOutput { smoothed })
}

/// Same smoothed sets as [`run_smoother`] in a representation of fixed size.
///
/// The exact filter only ever appends generator columns and constraint rows, so
/// the factor space of `⟦x_k | y_{0:k}⟧` is a prefix of that of
/// `⟦x_T | y_{0:T}⟧`, and its factor constraints are the leading block of the
/// final ones. The final factor polytope is exactly the set of initial-state and
/// noise realizations consistent with every measurement, and `Ĝ_k ξ + ĉ_k` maps
/// each such realization to its state at `k`. Hence
///
/// ```text
/// ⟦x_k | y_{0:T}⟧ = Z([Ĝ_k 0], ĉ_k, Â_T, b̂_T, ĥ_T).
/// ```
///
/// Requires the posteriors to come from [`crate::smf::run_filter`] (checked).
pub fn run_smoother_shared(filter_out: &[FilterState]) -> Result<SmootherOutput, SmootherError> {
    check_order(filter_out)?;
    let last = &filter_out[filter_out.len() - 1].posterior;
    let smoothed = filter_out
        .iter()
        .map(|s| {
            s.posterior
                .restrict_to_descendant(last)
                .ok_or(SmootherError::NotNested { k: s.k })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SmootherOutput { smoothed })
}
