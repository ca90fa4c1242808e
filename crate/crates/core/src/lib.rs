//! Guaranteed (set-membership) filtering and smoothing for systems with
//! bounded, non-stochastic uncertainties.
//!
//! * [`cz`]: constrained-zonotope set algebra on top of the simplex in [`lp`].
//! * [`smf`] / [`sms`]: exact filter and fixed-interval smoother for linear
//!   systems with constrained-zonotopic ranges.
//! * [`interval1d`]: exact filter and smoother for scalar systems
//!   `x⁺ = η(x) + w`, `y = αx + v` with strictly monotone `η`.
//! * [`model`]: system descriptions, benchmark presets and seeded simulation;
//!   [`sampling`] draws member points for soundness checks.
//! * [`rts`]: Kalman filter and Rauch–Tung–Striebel smoother baseline.
//! * [`oracle`]: brute-force lattice evaluation of the same recursions.
//! * [`harness`]: Monte-Carlo experiment driver and CSV output; [`demos`]
//!   wraps it into the two end-to-end examples.

pub mod cz;
pub mod demos;
pub mod harness;
pub mod interval1d;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod rts;
pub mod sampling;
pub mod smf;
pub mod sms;

/// First line of every CSV file written by this crate.
pub const CSV_HEADER: &str = "# zonosmooth-csv v1";
