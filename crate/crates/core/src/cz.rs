//! Constrained zonotopes.
//!
//! A constrained zonotope is the set
//!
//! ```text
//! Z(G, c, A, b, h) = { G ξ + c : A ξ = b, ξ ∈ ∏ⱼ [-hⱼ, hⱼ] }
//! ```
//!
//! with `hⱼ ∈ [0, ∞]`. The class is closed under linear maps, Minkowski sums and
//! generalized intersections, and each of those is a pure block manipulation of
//! the quintuple. Queries that need optimization (membership, emptiness,
//! support values) go through [`crate::lp`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{self, LpError, LpProblem, LpResult, LpSession, Sense};

/// Relative slack on `G ξ = x - c` used by [`ConstrainedZonotope::contains_point`].
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CzError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("half-width {index} is {value}, must lie in [0, +inf]")]
    InvalidHalfWidth { index: usize, value: f64 },
    #[error("set is empty")]
    Empty,
    #[error("invalid interval box: {0}")]
    InvalidBox(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl IntervalBox {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self, CzError> {
        if lower.len() != upper.len() {
            return Err(CzError::InvalidBox(format!(
                "bound lengths {} and {} differ",
                lower.len(),
                upper.len()
            )));
        }
        for i in 0..lower.len() {
            if lower[i].is_nan() || upper[i].is_nan() || lower[i] > upper[i] {
                return Err(CzError::InvalidBox(format!(
                    "coordinate {i}: [{}, {}]",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn from_slices(lower: &[f64], upper: &[f64]) -> Result<Self, CzError> {
        Self::new(
            DVector::from_column_slice(lower),
            DVector::from_column_slice(upper),
        )
    }

    /// The cube `[lo, hi]ⁿ`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self, CzError> {
        Self::new(
            DVector::from_element(n, lo),
            DVector::from_element(n, hi),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn widths(&self) -> DVector<f64> {
        &self.upper - &self.lower
    }

    pub fn max_width(&self) -> f64 {
        self.widths().iter().fold(0.0_f64, |a, &w| a.max(w))
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && (0..self.dim()).all(|i| self.lower[i] <= x[i] && x[i] <= self.upper[i])
    }

    /// True if `other ⊆ self` up to `slack` per face.
    pub fn encloses(&self, other: &IntervalBox, slack: f64) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|i| {
                other.lower[i] >= self.lower[i] - slack && other.upper[i] <= self.upper[i] + slack
            })
    }

    /// Grows every face outward by `margin[i]`.
    pub fn inflate(&self, margin: &DVector<f64>) -> IntervalBox {
        IntervalBox {
            lower: &self.lower - margin,
            upper: &self.upper + margin,
        }
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &IntervalBox) -> IntervalBox {
        IntervalBox {
            lower: self.lower.inf(&other.lower),
            upper: self.upper.sup(&other.upper),
        }
    }

    pub fn to_zonotope(&self) -> ConstrainedZonotope {
        ConstrainedZonotope::from_box(self)
    }
}

/// The quintuple `(G, c, A, b, h)`; see the module documentation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedZonotope {
    generators: DMatrix<f64>,
    center: DVector<f64>,
    constraints: DMatrix<f64>,
    rhs: DVector<f64>,
    half_widths: DVector<f64>,
}

impl ConstrainedZonotope {
    pub fn new(
        generators: DMatrix<f64>,
        center: DVector<f64>,
        constraints: DMatrix<f64>,
        rhs: DVector<f64>,
        half_widths: DVector<f64>,
    ) -> Result<Self, CzError> {
        let n_g = generators.ncols();
        if generators.nrows() != center.len() {
            return Err(CzError::Dimension(format!(
                "generator matrix has {} rows, center has {} entries",
                generators.nrows(),
                center.len()
            )));
        }
        if constraints.ncols() != n_g || half_widths.len() != n_g {
            return Err(CzError::Dimension(format!(
                "{n_g} generators but constraint matrix has {} columns and {} half-widths",
                constraints.ncols(),
                half_widths.len()
            )));
        }
        if constraints.nrows() != rhs.len() {
            return Err(CzError::Dimension(format!(
                "constraint matrix has {} rows, rhs has {} entries",
                constraints.nrows(),
                rhs.len()
            )));
        }
        for (index, &value) in half_widths.iter().enumerate() {
            if value.is_nan() || value < 0.0 {
                return Err(CzError::InvalidHalfWidth { index, value });
            }
        }
        Ok(Self {
            generators,
            center,
            constraints,
            rhs,
            half_widths,
        })
    }

    /// Unconstrained zonotope `{G ξ + c : ‖ξ‖∞ ≤ 1}`.
    pub fn zonotope(generators: DMatrix<f64>, center: DVector<f64>) -> Result<Self, CzError> {
        let n_g = generators.ncols();
        Self::new(
            generators,
            center,
            DMatrix::zeros(0, n_g),
            DVector::zeros(0),
            DVector::from_element(n_g, 1.0),
        )
    }

    /// The singleton `{c}` (no generators).
    pub fn point(c: DVector<f64>) -> Self {
        let n = c.len();
        Self {
            generators: DMatrix::zeros(n, 0),
            center: c,
            constraints: DMatrix::zeros(0, 0),
            rhs: DVector::zeros(0),
            half_widths: DVector::zeros(0),
        }
    }

    /// Box with one diagonal generator per coordinate.
    pub fn from_box(b: &IntervalBox) -> Self {
        let n = b.dim();
        let half = (&b.upper - &b.lower) * 0.5;
        Self {
            generators: DMatrix::from_diagonal(&half),
            center: b.center(),
            constraints: DMatrix::zeros(0, n),
            rhs: DVector::zeros(0),
            half_widths: DVector::from_element(n, 1.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.nrows()
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn constraints(&self) -> &DMatrix<f64> {
        &self.constraints
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    pub fn half_widths(&self) -> &DVector<f64> {
        &self.half_widths
    }

    /// `{F z : z ∈ Z}`.
    pub fn linear_map(&self, f: &DMatrix<f64>) -> Result<Self, CzError> {
        if f.ncols() != self.dim() {
            return Err(CzError::Dimension(format!(
                "map has {} columns, set lives in R^{}",
                f.ncols(),
                self.dim()
            )));
        }
        Ok(Self {
            generators: f * &self.generators,
            center: f * &self.center,
            constraints: self.constraints.clone(),
            rhs: self.rhs.clone(),
            half_widths: self.half_widths.clone(),
        })
    }

    /// `{z + w : z ∈ Z, w ∈ W}`; generator blocks are ordered `[Z, W]`.
    pub fn minkowski_sum(&self, other: &Self) -> Result<Self, CzError> {
        if other.dim() != self.dim() {
            return Err(CzError::Dimension(format!(
                "Minkowski sum of sets in R^{} and R^{}",
                self.dim(),
                other.dim()
            )));
        }
        let (g1, g2) = (self.num_generators(), other.num_generators());
        let (c1, c2) = (self.num_constraints(), other.num_constraints());
        let n = self.dim();

        let mut generators = DMatrix::zeros(n, g1 + g2);
        generators.columns_mut(0, g1).copy_from(&self.generators);
        generators.columns_mut(g1, g2).copy_from(&other.generators);

        let mut constraints = DMatrix::zeros(c1 + c2, g1 + g2);
        constraints
            .view_mut((0, 0), (c1, g1))
            .copy_from(&self.constraints);
        constraints
            .view_mut((c1, g1), (c2, g2))
            .copy_from(&other.constraints);

        Ok(Self {
            generators,
            center: &self.center + &other.center,
            constraints,
            rhs: stack(&self.rhs, &other.rhs),
            half_widths: stack(&self.half_widths, &other.half_widths),
        })
    }

    /// `{z ∈ Z : R z ∈ Y}`.
    ///
    /// Rows are ordered `[A_z; A_y; coupling]`, columns `[ξ_z, ξ_y]`.
    pub fn generalized_intersection(&self, r: &DMatrix<f64>, y: &Self) -> Result<Self, CzError> {
        if r.ncols() != self.dim() || r.nrows() != y.dim() {
            return Err(CzError::Dimension(format!(
                "map is {}x{}, expected {}x{}",
                r.nrows(),
                r.ncols(),
                y.dim(),
                self.dim()
            )));
        }
        let (gz, gy) = (self.num_generators(), y.num_generators());
        let (cz, cy) = (self.num_constraints(), y.num_constraints());
        let (n, m) = (self.dim(), y.dim());

        let mut generators = DMatrix::zeros(n, gz + gy);
        generators.columns_mut(0, gz).copy_from(&self.generators);

        let mut constraints = DMatrix::zeros(cz + cy + m, gz + gy);
        constraints
            .view_mut((0, 0), (cz, gz))
            .copy_from(&self.constraints);
        constraints
            .view_mut((cz, gz), (cy, gy))
            .copy_from(&y.constraints);
        constraints
            .view_mut((cz + cy, 0), (m, gz))
            .copy_from(&(r * &self.generators));
        constraints
            .view_mut((cz + cy, gz), (m, gy))
            .copy_from(&(-&y.generators));

        let coupling_rhs = &y.center - r * &self.center;
        let rhs = stack(&stack(&self.rhs, &y.rhs), &coupling_rhs);

        Ok(Self {
            generators,
            center: self.center.clone(),
            constraints,
            rhs,
            half_widths: stack(&self.half_widths, &y.half_widths),
        })
    }

    /// `-Z`, written as `Z(G, -c, -A, b, h)` so that generator columns keep their sign.
    pub fn reflect(&self) -> Self {
        Self {
            generators: self.generators.clone(),
            center: -&self.center,
            constraints: -&self.constraints,
            rhs: self.rhs.clone(),
            half_widths: self.half_widths.clone(),
        }
    }

    /// Zero-pads the generator matrix to `num_generators` columns and replaces the
    /// constraint system by that of `descendant`.
    ///
    /// Valid when `descendant` was derived from `self` by operations that only
    /// append generator columns and constraint rows (linear maps, Minkowski sums,
    /// generalized intersections with `self` on the left): then `self`'s factor
    /// space is a prefix of the descendant's and the result is the set of values
    /// `G ξ + c` over the descendant's feasible ξ. Returns `None` if the prefix
    /// structure does not hold.
    pub fn restrict_to_descendant(&self, descendant: &Self) -> Option<Self> {
        let (g, c) = (self.num_generators(), self.num_constraints());
        let (gd, cd) = (descendant.num_generators(), descendant.num_constraints());
        if gd < g || cd < c {
            return None;
        }
        if descendant.half_widths.rows(0, g) != self.half_widths
            || descendant.rhs.rows(0, c) != self.rhs
            || descendant.constraints.view((0, 0), (c, g)) != self.constraints
            || descendant
                .constraints
                .view((0, g), (c, gd - g))
                .iter()
                .any(|&v| v != 0.0)
        {
            return None;
        }
        let mut generators = DMatrix::zeros(self.dim(), gd);
        generators.columns_mut(0, g).copy_from(&self.generators);
        Some(Self {
            generators,
            center: self.center.clone(),
            constraints: descendant.constraints.clone(),
            rhs: descendant.rhs.clone(),
            half_widths: descendant.half_widths.clone(),
        })
    }

    fn factor_bounds(&self) -> (DVector<f64>, DVector<f64>) {
        (-&self.half_widths, self.half_widths.clone())
    }

    /// True iff the factor polytope `{A ξ = b, |ξ| ≤ h}` is empty.
    pub fn is_empty(&self) -> Result<bool, CzError> {
        if self.num_constraints() == 0 {
            return Ok(false);
        }
        let (lo, hi) = self.factor_bounds();
        let p = LpProblem::feasibility(self.constraints.clone(), self.rhs.clone(), lo, hi)?;
        Ok(!lp::is_feasible(&p)?)
    }

    /// Membership test with `‖G ξ - (x - c)‖∞ ≤ 1e-7 (1 + ‖x‖∞)`.
    pub fn contains_point(&self, x: &DVector<f64>) -> Result<bool, CzError> {
        if x.len() != self.dim() {
            return Err(CzError::Dimension(format!(
                "point has {} entries, set lives in R^{}",
                x.len(),
                self.dim()
            )));
        }
        let slack = MEMBERSHIP_TOLERANCE * (1.0 + x.amax());
        let (n, g, c) = (self.dim(), self.num_generators(), self.num_constraints());
        // Variables [ξ, s] with s the equality slack on the point rows.
        let mut a = DMatrix::zeros(n + c, g + n);
        a.view_mut((0, 0), (n, g)).copy_from(&self.generators);
        a.view_mut((0, g), (n, n)).fill_with_identity();
        a.view_mut((n, 0), (c, g)).copy_from(&self.constraints);
        let rhs = stack(&(x - &self.center), &self.rhs);
        let (lo, hi) = self.factor_bounds();
        let lo = stack(&lo, &DVector::from_element(n, -slack));
        let hi = stack(&hi, &DVector::from_element(n, slack));
        let p = LpProblem::feasibility(a, rhs, lo, hi)?;
        Ok(lp::is_feasible(&p)?)
    }

    /// `max { dᵀ z : z ∈ Z }`; `+∞` when unbounded in that direction.
    pub fn support_value(&self, direction: &DVector<f64>) -> Result<f64, CzError> {
        if direction.len() != self.dim() {
            return Err(CzError::Dimension(format!(
                "direction has {} entries, set lives in R^{}",
                direction.len(),
                self.dim()
            )));
        }
        let weights = self.generators.tr_mul(direction);
        let offset = direction.dot(&self.center);
        if self.num_constraints() == 0 {
            let mut value = offset;
            for (w, h) in weights.iter().zip(self.half_widths.iter()) {
                if *w != 0.0 {
                    value += w.abs() * h;
                }
            }
            return Ok(value);
        }
        let mut session = self.factor_session()?;
        self.support_in(&mut session, direction)
    }

    fn factor_session(&self) -> Result<LpSession, CzError> {
        let (lo, hi) = self.factor_bounds();
        let p = LpProblem::feasibility(self.constraints.clone(), self.rhs.clone(), lo, hi)?;
        let session = LpSession::new(&p)?;
        if !session.is_feasible() {
            return Err(CzError::Empty);
        }
        Ok(session)
    }

    fn same_factors(&self, other: &Self) -> bool {
        self.half_widths == other.half_widths
            && self.rhs == other.rhs
            && self.constraints == other.constraints
    }

    /// Support value using a session over this set's factor polytope.
    fn support_in(&self, session: &mut LpSession, direction: &DVector<f64>) -> Result<f64, CzError> {
        let weights = self.generators.tr_mul(direction);
        let offset = direction.dot(&self.center);
        match session.solve(&weights, Sense::Maximize)? {
            LpResult::Optimal { value, .. } => Ok(value + offset),
            LpResult::Unbounded => Ok(f64::INFINITY),
            LpResult::Infeasible => Err(CzError::Empty),
        }
    }

    /// Tightest axis-aligned box containing the set.
    pub fn interval_hull(&self) -> Result<IntervalBox, CzError> {
        Ok(Self::interval_hulls(std::slice::from_ref(self))?.remove(0))
    }

    /// Interval hulls of several sets. Runs of consecutive sets with the same
    /// factor polytope `(A, b, h)` share one warm-started LP session, which
    /// makes this much cheaper than separate [`Self::interval_hull`] calls for
    /// the outputs of the shared-lineage smoother.
    pub fn interval_hulls(sets: &[Self]) -> Result<Vec<IntervalBox>, CzError> {
        let mut out = Vec::with_capacity(sets.len());
        let mut start = 0;
        while start < sets.len() {
            let mut end = start + 1;
            while end < sets.len() && sets[end].same_factors(&sets[start]) {
                end += 1;
            }
            out.extend(Self::hulls_of_run(&sets[start..end])?);
            start = end;
        }
        Ok(out)
    }

    fn hulls_of_run(run: &[Self]) -> Result<Vec<IntervalBox>, CzError> {
        let mut boxes: Vec<IntervalBox> = run
            .iter()
            .map(|z| IntervalBox {
                lower: DVector::zeros(z.dim()),
                upper: DVector::zeros(z.dim()),
            })
            .collect();
        if run[0].num_constraints() == 0 {
            for (z, bx) in run.iter().zip(boxes.iter_mut()) {
                for i in 0..z.dim() {
                    let radius: f64 = (0..z.num_generators())
                        .filter(|&j| z.generators[(i, j)] != 0.0)
                        .map(|j| z.generators[(i, j)].abs() * z.half_widths[j])
                        .sum();
                    bx.lower[i] = z.center[i] - radius;
                    bx.upper[i] = z.center[i] + radius;
                }
            }
            return Ok(boxes);
        }
        let mut session = run[0].factor_session()?;
        // Sweep one direction across the run at a time: neighbouring sets tend
        // to have nearby optimal vertices.
        let n = run.iter().map(Self::dim).max().unwrap_or(0);
        for i in 0..n {
            for sign in [1.0, -1.0] {
                for (z, bx) in run.iter().zip(boxes.iter_mut()) {
                    if i >= z.dim() {
                        continue;
                    }
                    let mut e = DVector::zeros(z.dim());
                    e[i] = sign;
                    let v = z.support_in(&mut session, &e)?;
                    if sign > 0.0 {
                        bx.upper[i] = v;
                    } else {
                        bx.lower[i] = -v;
                    }
                }
            }
        }
        Ok(boxes)
    }

    /// `sup ‖s - s'‖∞` over the set, i.e. the widest interval-hull side.
    pub fn diameter_inf(&self) -> Result<f64, CzError> {
        Ok(self.interval_hull()?.max_width())
    }
}

fn stack(top: &DVector<f64>, bottom: &DVector<f64>) -> DVector<f64> {
    let mut v = DVector::zeros(top.len() + bottom.len());
    v.rows_mut(0, top.len()).copy_from(top);
    v.rows_mut(top.len(), bottom.len()).copy_from(bottom);
    v
}

/// Plain serialized form of a constrained zonotope. Matrices are row-major and
/// half-widths may be the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzRecord {
    pub n: usize,
    pub n_g: usize,
    pub n_c: usize,
    #[serde(rename = "G")]
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub h: Vec<HalfWidth>,
}

/// A half-width entry: a finite nonnegative number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HalfWidth {
    Finite(f64),
    Named(InfinityTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfinityTag {
    #[serde(rename = "inf")]
    Inf,
}

impl HalfWidth {
    pub fn value(self) -> f64 {
        match self {
            HalfWidth::Finite(v) => v,
            HalfWidth::Named(InfinityTag::Inf) => f64::INFINITY,
        }
    }

    fn from_value(v: f64) -> Self {
        if v == f64::INFINITY {
            HalfWidth::Named(InfinityTag::Inf)
        } else {
            HalfWidth::Finite(v)
        }
    }
}

impl From<&ConstrainedZonotope> for CzRecord {
    fn from(z: &ConstrainedZonotope) -> Self {
        let row_major = |m: &DMatrix<f64>| m.transpose().as_slice().to_vec();
        Self {
            n: z.dim(),
            n_g: z.num_generators(),
            n_c: z.num_constraints(),
            g: row_major(&z.generators),
            c: z.center.as_slice().to_vec(),
            a: row_major(&z.constraints),
            b: z.rhs.as_slice().to_vec(),
            h: z.half_widths.iter().map(|&v| HalfWidth::from_value(v)).collect(),
        }
    }
}

impl TryFrom<&CzRecord> for ConstrainedZonotope {
    type Error = CzError;

    fn try_from(r: &CzRecord) -> Result<Self, CzError> {
        let check = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(CzError::Dimension(format!(
                    "field {name} has {got} entries, expected {want}"
                )))
            }
        };
        check("G", r.g.len(), r.n * r.n_g)?;
        check("c", r.c.len(), r.n)?;
        check("A", r.a.len(), r.n_c * r.n_g)?;
        check("b", r.b.len(), r.n_c)?;
        check("h", r.h.len(), r.n_g)?;
        ConstrainedZonotope::new(
            DMatrix::from_row_slice(r.n, r.n_g, &r.g),
            DVector::from_column_slice(&r.c),
            DMatrix::from_row_slice(r.n_c, r.n_g, &r.a),
            DVector::from_column_slice(&r.b),
            DVector::from_iterator(r.n_g, r.h.iter().map(|h| h.value())),
        )
    }
}

impl ConstrainedZonotope {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&CzRecord::from(self)).expect("record serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self, CzError> {
        let record: CzRecord = serde_json::from_str(s)
            .map_err(|e| CzError::Dimension(format!("malformed record: {e}")))?;
        Self::try_from(&record)
    }
}
