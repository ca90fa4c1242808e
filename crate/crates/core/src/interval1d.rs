//! Exact filtering and smoothing for scalar systems
//!
//! ```text
//! x_{k+1} = η(x_k) + w_k,     y_k = α x_k + v_k
//! ```
//!
//! with `η` continuous and strictly monotone, and interval ranges for the
//! initial state and both noises. All ranges stay intervals: the forward image
//! of an interval under a monotone map is the interval spanned by the images of
//! its endpoints, and the same holds for the backward image `η⁻¹(x - w)` over a
//! rectangle of `(x, w)` values.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::model::ScalarAffineSystem;

/// Relative residual accepted by [`eta_inverse`].
pub const INVERSE_TOLERANCE: f64 = 1e-12;

const MONOTONICITY_CHECK_POINTS: usize = 1001;
const MAX_BISECTION_STEPS: usize = 4000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Interval1dError {
    #[error("invalid interval [{0}, {1}]")]
    InvalidInterval(f64, f64),
    #[error("map `{name}` is not strictly monotone near x = {at}")]
    NotMonotone { name: String, at: f64 },
    #[error("value {value} lies outside the image [{lo}, {hi}] of `{name}`")]
    OutOfDomain {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("bisection for `{name}` failed to converge at y = {value}")]
    NoConvergence { name: String, value: f64 },
    #[error("measurement gain must be nonzero")]
    ZeroGain,
    #[error("range at step {k} is empty (data inconsistent with the model)")]
    EmptyRange { k: usize },
    #[error("{0} measurements supplied, expected at least one")]
    NoMeasurements(usize),
}

/// Closed interval `[lo, hi]` with `lo ≤ hi`. Empty results are `Option::None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, Interval1dError> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Interval1dError::InvalidInterval(lo, hi));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A continuous, strictly monotone scalar map on a (possibly unbounded) domain.
#[derive(Clone)]
pub struct MonotoneMap {
    name: String,
    forward: ScalarFn,
    domain: (f64, f64),
    increasing: bool,
}

impl fmt::Debug for MonotoneMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneMap")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("increasing", &self.increasing)
            .finish()
    }
}

impl MonotoneMap {
    /// Builds the map and spot-checks strict monotonicity on a grid over the
    /// domain (truncated to `[-1e3, 1e3]` when unbounded).
    pub fn new<F>(name: impl Into<String>, f: F, lo: f64, hi: f64) -> Result<Self, Interval1dError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let name = name.into();
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Interval1dError::InvalidInterval(lo, hi));
        }
        let a = if lo.is_finite() { lo } else { hi.min(1e3) - 2e3 };
        let b = if hi.is_finite() { hi } else { lo.max(-1e3) + 2e3 };
        let step = (b - a) / (MONOTONICITY_CHECK_POINTS - 1) as f64;
        let values: Vec<(f64, f64)> = (0..MONOTONICITY_CHECK_POINTS)
            .map(|i| {
                let x = a + step * i as f64;
                (x, f(x))
            })
            .collect();
        // Ties are tolerated (floating-point saturation, e.g. exp underflow);
        // any reversal, or a map constant over the whole grid, is rejected.
        let (first, last) = (values[0].1, values[values.len() - 1].1);
        let increasing = last > first;
        if first == last || first.is_nan() || last.is_nan() {
            return Err(Interval1dError::NotMonotone { name, at: a });
        }
        for w in values.windows(2) {
            let (x, fx) = w[0];
            let fy = w[1].1;
            let ok = if increasing { fy >= fx } else { fy <= fx };
            if !ok || fx.is_nan() || fy.is_nan() {
                return Err(Interval1dError::NotMonotone { name, at: x });
            }
        }
        Ok(Self {
            name,
            forward: Arc::new(f),
            domain: (lo, hi),
            increasing,
        })
    }

    pub fn identity() -> Self {
        Self::new("identity", |x| x, f64::NEG_INFINITY, f64::INFINITY)
            .expect("identity is increasing")
    }

    /// `x ↦ a x + b` with `a ≠ 0`.
    pub fn affine(a: f64, b: f64) -> Result<Self, Interval1dError> {
        Self::new(
            format!("{a}*x + {b}"),
            move |x| a * x + b,
            f64::NEG_INFINITY,
            f64::INFINITY,
        )
    }

    /// `x ↦ ∛x + x` on ℝ, using the real (odd) cube root for negative `x`.
    pub fn cube_root_plus_identity() -> Self {
        Self::new(
            "cbrt(x) + x",
            |x: f64| x.cbrt() + x,
            f64::NEG_INFINITY,
            f64::INFINITY,
        )
        .expect("cbrt(x) + x is increasing")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_increasing(&self) -> bool {
        self.increasing
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.forward)(x)
    }

    /// Image of the whole domain as `(inf, sup)`; endpoints may be infinite.
    pub fn image(&self) -> (f64, f64) {
        let at = |x: f64, fallback: f64| {
            let v = self.eval(x);
            if v.is_nan() {
                fallback
            } else {
                v
            }
        };
        let (lo, hi) = self.domain;
        let (flo, fhi) = if self.increasing {
            (at(lo, f64::NEG_INFINITY), at(hi, f64::INFINITY))
        } else {
            (at(lo, f64::INFINITY), at(hi, f64::NEG_INFINITY))
        };
        (flo.min(fhi), flo.max(fhi))
    }

    /// Forward image of an interval inside the domain.
    pub fn image_of(&self, x: &Interval) -> Result<Interval, Interval1dError> {
        let (lo, hi) = self.domain;
        if x.lo < lo || x.hi > hi {
            return Err(Interval1dError::OutOfDomain {
                name: self.name.clone(),
                value: if x.lo < lo { x.lo } else { x.hi },
                lo,
                hi,
            });
        }
        let (a, b) = (self.eval(x.lo), self.eval(x.hi));
        Interval::new(a.min(b), a.max(b))
    }
}

/// Solves `η(x) = y` by bisection on an auto-expanding bracket.
pub fn eta_inverse(m: &MonotoneMap, y: f64) -> Result<f64, Interval1dError> {
    let (img_lo, img_hi) = m.image();
    if y.is_nan() || y < img_lo || y > img_hi {
        return Err(Interval1dError::OutOfDomain {
            name: m.name.clone(),
            value: y,
            lo: img_lo,
            hi: img_hi,
        });
    }
    let sign = if m.increasing { 1.0 } else { -1.0 };
    let g = |x: f64| sign * (m.eval(x) - y);
    let (dlo, dhi) = m.domain;

    let start = y.clamp(dlo, dhi);
    let mut width = 1.0;
    let mut lo = (start - width).max(dlo);
    let mut hi = (start + width).min(dhi);
    let out_of_domain = || Interval1dError::OutOfDomain {
        name: m.name.clone(),
        value: y,
        lo: img_lo,
        hi: img_hi,
    };
    while g(lo) > 0.0 {
        if lo == dlo || !lo.is_finite() {
            return Err(out_of_domain());
        }
        width *= 2.0;
        lo = (start - width).max(dlo);
    }
    while g(hi) < 0.0 {
        if hi == dhi || !hi.is_finite() {
            return Err(out_of_domain());
        }
        width *= 2.0;
        hi = (start + width).min(dhi);
    }

    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            // Bracket collapsed to adjacent floats: best representable answer.
            return Ok(if g(lo).abs() <= g(hi).abs() { lo } else { hi });
        }
        if gm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Interval1dError::NoConvergence {
        name: m.name.clone(),
        value: y,
    })
}

/// Prior and posterior range at one step of the scalar filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState1d {
    pub k: usize,
    pub prior: Interval,
    pub posterior: Interval,
}

/// `η(⟦x_k | y_{0:k}⟧) + ⟦w⟧`.
pub fn predict_1d(posterior: &Interval, sys: &ScalarAffineSystem) -> Result<Interval, Interval1dError> {
    let image = sys.eta.image_of(posterior)?;
    Interval::new(image.lo + sys.w_range.lo, image.hi + sys.w_range.hi)
}

/// States compatible with `y = α x + v`, `v ∈ ⟦v⟧`.
pub fn measurement_set(y: f64, sys: &ScalarAffineSystem) -> Result<Interval, Interval1dError> {
    let alpha = sys.meas_gain;
    if alpha == 0.0 {
        return Err(Interval1dError::ZeroGain);
    }
    let a = (y - sys.v_range.hi) / alpha;
    let b = (y - sys.v_range.lo) / alpha;
    Interval::new(a.min(b), a.max(b))
}

/// Posterior `prior ∩ measurement set`; `None` when they do not overlap.
pub fn update_1d(
    prior: &Interval,
    y: f64,
    sys: &ScalarAffineSystem,
) -> Result<Option<Interval>, Interval1dError> {
    Ok(prior.intersect(&measurement_set(y, sys)?))
}

/// One predict + update cycle from the previous posterior.
pub fn filter_step_1d(
    posterior_prev: &Interval,
    y: f64,
    sys: &ScalarAffineSystem,
) -> Result<(Interval, Option<Interval>), Interval1dError> {
    let prior = predict_1d(posterior_prev, sys)?;
    let posterior = update_1d(&prior, y, sys)?;
    Ok((prior, posterior))
}

/// Runs the filter over `y_0..y_T`, starting from the prior `⟦x_0⟧`.
pub fn run_filter_1d(
    sys: &ScalarAffineSystem,
    measurements: &[f64],
) -> Result<Vec<FilterState1d>, Interval1dError> {
    if measurements.is_empty() {
        return Err(Interval1dError::NoMeasurements(0));
    }
    let mut out: Vec<FilterState1d> = Vec::with_capacity(measurements.len());
    for (k, &y) in measurements.iter().enumerate() {
        let prior = match out.last() {
            None => sys.x0_range,
            Some(prev) => predict_1d(&prev.posterior, sys)?,
        };
        let posterior = update_1d(&prior, y, sys)?.ok_or(Interval1dError::EmptyRange { k })?;
        out.push(FilterState1d {
            k,
            prior,
            posterior,
        });
    }
    Ok(out)
}

/// Backward image of `smoothed_next` intersected with the posterior.
///
/// The extrema of `η⁻¹(x - w)` over `x ∈ [ã_{k+1}, b̃_{k+1}]`, `w ∈ ⟦w⟧` are
/// attained at rectangle corners: for increasing `η` at `(ã, b_w)` and
/// `(b̃, a_w)`, for decreasing `η` at the opposite pair.
pub fn smooth_step_1d(
    posterior: &Interval,
    smoothed_next: &Interval,
    w_range: &Interval,
    m: &MonotoneMap,
) -> Result<Option<Interval>, Interval1dError> {
    let args = Interval::new(smoothed_next.lo - w_range.hi, smoothed_next.hi - w_range.lo)?;
    let (img_lo, img_hi) = m.image();
    // Arguments outside η's image have no preimage.
    let Some(args) = args.intersect(&Interval {
        lo: img_lo,
        hi: img_hi,
    }) else {
        return Ok(None);
    };
    let (p, q) = (eta_inverse(m, args.lo)?, eta_inverse(m, args.hi)?);
    let backward = Interval::new(p.min(q), p.max(q))?;
    Ok(posterior.intersect(&backward))
}

/// Backward pass over the filter output; `result[T] = posterior_T`.
pub fn run_smoother_1d(
    filter_out: &[FilterState1d],
    sys: &ScalarAffineSystem,
) -> Result<Vec<Interval>, Interval1dError> {
    let Some(last) = filter_out.last() else {
        return Err(Interval1dError::NoMeasurements(0));
    };
    let mut smoothed = vec![last.posterior; filter_out.len()];
    for k in (0..filter_out.len() - 1).rev() {
        smoothed[k] = smooth_step_1d(
            &filter_out[k].posterior,
            &smoothed[k + 1],
            &sys.w_range,
            &sys.eta,
        )?
        .ok_or(Interval1dError::EmptyRange { k })?;
    }
    Ok(smoothed)
}
