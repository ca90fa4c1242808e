//! Dense bounded-variable primal simplex.
//!
//! Solves
//!
//! ```text
//! min / max  cᵀx   s.t.  A x = b,  l ≤ x ≤ u
//! ```
//!
//! where entries of `l` may be `-∞` and entries of `u` may be `+∞`. This is the
//! engine behind every constrained-zonotope query (membership, emptiness,
//! support values, interval hulls). The problems it sees are small and dense,
//! so a full tableau is kept and periodically rebuilt from an LU factorization
//! of the basis.
//!
//! Pricing is Dantzig's rule; after a run of degenerate pivots the solver
//! switches to Bland's rule until the objective moves again.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Numerical tolerances of the simplex engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Phase-1 optimum below `feasibility · (1 + ‖b‖∞)` counts as feasible.
    pub feasibility: f64,
    /// Tableau entries at or below this magnitude are never pivoted on.
    pub pivot: f64,
    /// Reduced costs must exceed this to be considered improving.
    pub optimality: f64,
    /// Relative tolerance of the post-hoc feasibility check of the argmin.
    pub verification: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-9,
            pivot: 1e-11,
            optimality: 1e-9,
            verification: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid bounds for variable {index}: [{lower}, {upper}]")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },
    #[error("non-finite problem data: {0}")]
    NonFinite(&'static str),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("iteration limit of {0} pivots exceeded")]
    IterationLimit(usize),
    #[error("reported optimum violates the constraints by {violation:e}")]
    VerificationFailed { violation: f64 },
}

/// A linear program with equality rows and (possibly infinite) variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub sense: Sense,
}

impl LpProblem {
    pub fn new(
        objective: DVector<f64>,
        eq_matrix: DMatrix<f64>,
        eq_rhs: DVector<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
        sense: Sense,
    ) -> Result<Self, LpError> {
        let p = Self {
            objective,
            eq_matrix,
            eq_rhs,
            lower,
            upper,
            sense,
        };
        p.validate()?;
        Ok(p)
    }

    /// Pure feasibility problem (zero objective).
    pub fn feasibility(
        eq_matrix: DMatrix<f64>,
        eq_rhs: DVector<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Result<Self, LpError> {
        let n = eq_matrix.ncols();
        Self::new(
            DVector::zeros(n),
            eq_matrix,
            eq_rhs,
            lower,
            upper,
            Sense::Minimize,
        )
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if self.eq_matrix.ncols() != n {
            return Err(LpError::Dimension(format!(
                "constraint matrix has {} columns, objective has {n} entries",
                self.eq_matrix.ncols()
            )));
        }
        if self.eq_matrix.nrows() != self.eq_rhs.len() {
            return Err(LpError::Dimension(format!(
                "constraint matrix has {} rows, rhs has {} entries",
                self.eq_matrix.nrows(),
                self.eq_rhs.len()
            )));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Dimension(format!(
                "bounds have lengths {}/{}, expected {n}",
                self.lower.len(),
                self.upper.len()
            )));
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        if self.eq_matrix.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("constraint matrix"));
        }
        if self.eq_rhs.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("right-hand side"));
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY
            {
                return Err(LpError::InvalidBounds {
                    index: j,
                    lower: l,
                    upper: u,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpResult {
    Optimal { value: f64, point: DVector<f64> },
    Infeasible,
    Unbounded,
}

impl LpResult {
    pub fn is_optimal(&self) -> bool {
        matches!(self, LpResult::Optimal { .. })
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            LpResult::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn point(&self) -> Option<&DVector<f64>> {
        match self {
            LpResult::Optimal { point, .. } => Some(point),
            _ => None,
        }
    }
}

pub fn solve_lp(p: &LpProblem) -> Result<LpResult, LpError> {
    solve_lp_with(p, &Tolerances::default())
}

pub fn solve_lp_with(p: &LpProblem, tol: &Tolerances) -> Result<LpResult, LpError> {
    LpSession::with_tolerances(p, tol)?.solve(&p.objective, p.sense)
}

/// Returns true iff `{A x = b, l ≤ x ≤ u}` is nonempty.
pub fn is_feasible(p: &LpProblem) -> Result<bool, LpError> {
    is_feasible_with(p, &Tolerances::default())
}

pub fn is_feasible_with(p: &LpProblem, tol: &Tolerances) -> Result<bool, LpError> {
    Ok(LpSession::with_tolerances(p, tol)?.is_feasible())
}

/// A feasible region `{A x = b, l ≤ x ≤ u}` prepared for repeated optimization.
///
/// Phase 1 runs once on construction. Each [`LpSession::solve`] starts phase 2
/// from the optimal basis of the previous call, so a sequence of related
/// objectives over the same region costs a few pivots each. Results depend on
/// the call sequence only through round-off; every reported optimum is
/// verified against the original data.
pub struct LpSession {
    problem: LpProblem,
    tol: Tolerances,
    simplex: Option<Simplex>,
}

impl LpSession {
    /// Uses the constraints and bounds of `p`; its objective is ignored.
    pub fn new(p: &LpProblem) -> Result<Self, LpError> {
        Self::with_tolerances(p, &Tolerances::default())
    }

    pub fn with_tolerances(p: &LpProblem, tol: &Tolerances) -> Result<Self, LpError> {
        p.validate()?;
        let mut simplex = Simplex::build(p, tol)?;
        if let Some(s) = simplex.as_mut() {
            if s.phase_one()? {
                verify(p, &s.structural_point(), tol)?;
            } else {
                simplex = None;
            }
        }
        Ok(Self {
            problem: p.clone(),
            tol: *tol,
            simplex,
        })
    }

    pub fn is_feasible(&self) -> bool {
        self.simplex.is_some()
    }

    pub fn num_vars(&self) -> usize {
        self.problem.num_vars()
    }

    /// Current basic solution, if the region is nonempty.
    pub fn feasible_point(&self) -> Option<DVector<f64>> {
        self.simplex.as_ref().map(Simplex::structural_point)
    }

    pub fn solve(&mut self, objective: &DVector<f64>, sense: Sense) -> Result<LpResult, LpError> {
        if objective.len() != self.problem.num_vars() {
            return Err(LpError::Dimension(format!(
                "objective has {} entries, expected {}",
                objective.len(),
                self.problem.num_vars()
            )));
        }
        if objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        let Some(simplex) = self.simplex.as_mut() else {
            return Ok(LpResult::Infeasible);
        };
        let sign = match sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let cost: Vec<f64> = objective.iter().map(|c| sign * c).collect();
        if !simplex.phase_two(&cost)? {
            return Ok(LpResult::Unbounded);
        }
        let mut point = simplex.structural_point();
        if verify(&self.problem, &point, &self.tol).is_err() {
            // Accumulated drift in the warm tableau: rebuild and polish once.
            simplex.reinvert()?;
            simplex.recompute_reduced();
            if !simplex.iterate()? {
                return Ok(LpResult::Unbounded);
            }
            simplex.refresh_values()?;
            point = simplex.structural_point();
            verify(&self.problem, &point, &self.tol)?;
        }
        let value = objective.dot(&point);
        Ok(LpResult::Optimal { value, point })
    }
}

fn verify(p: &LpProblem, x: &DVector<f64>, tol: &Tolerances) -> Result<(), LpError> {
    let mut worst = 0.0_f64;
    for i in 0..p.num_rows() {
        let mut lhs = 0.0;
        let mut mag = p.eq_rhs[i].abs();
        for j in 0..p.num_vars() {
            let t = p.eq_matrix[(i, j)] * x[j];
            lhs += t;
            mag += t.abs();
        }
        worst = worst.max((lhs - p.eq_rhs[i]).abs() / (1.0 + mag));
    }
    for j in 0..p.num_vars() {
        let scale = 1.0 + x[j].abs();
        if x[j] < p.lower[j] {
            worst = worst.max((p.lower[j] - x[j]) / scale);
        }
        if x[j] > p.upper[j] {
            worst = worst.max((x[j] - p.upper[j]) / scale);
        }
    }
    if worst > tol.verification {
        return Err(LpError::VerificationFailed { violation: worst });
    }
    Ok(())
}

const DEGENERATE_RUN_BEFORE_BLAND: usize = 50;
const REINVERT_EVERY: usize = 100;

/// Full-tableau state. Columns `0..n` are the structural variables, columns
/// `n..n+m` the phase-1 artificials.
struct Simplex {
    m: usize,
    n: usize,
    width: usize,
    // Scaled original data, kept for reinversion.
    a: Vec<f64>,
    b: Vec<f64>,
    art_sign: Vec<f64>,
    // B⁻¹ [A | diag(art_sign)], row-major m × width.
    tab: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    row_of: Vec<Option<usize>>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    tol: Tolerances,
    pivots: usize,
    max_pivots: usize,
}

impl Simplex {
    /// Returns `None` when a trivially contradictory (all-zero) row is found.
    fn build(p: &LpProblem, tol: &Tolerances) -> Result<Option<Self>, LpError> {
        let n = p.num_vars();
        let b_norm = p.eq_rhs.amax();
        // Drop all-zero rows; a nonzero rhs on such a row is infeasible.
        let mut rows = Vec::new();
        for i in 0..p.num_rows() {
            let scale = p.eq_matrix.row(i).amax();
            if scale == 0.0 {
                if p.eq_rhs[i].abs() > tol.feasibility * (1.0 + b_norm) {
                    return Ok(None);
                }
                continue;
            }
            rows.push((i, scale));
        }
        let m = rows.len();
        let width = n + m;
        let mut a = vec![0.0; m * n];
        let mut b = vec![0.0; m];
        for (r, &(i, scale)) in rows.iter().enumerate() {
            for j in 0..n {
                a[r * n + j] = p.eq_matrix[(i, j)] / scale;
            }
            b[r] = p.eq_rhs[i] / scale;
        }

        let mut lower = vec![0.0; width];
        let mut upper = vec![f64::INFINITY; width];
        let mut x = vec![0.0; width];
        for j in 0..n {
            lower[j] = p.lower[j];
            upper[j] = p.upper[j];
            x[j] = if lower[j].is_finite() {
                lower[j]
            } else if upper[j].is_finite() {
                upper[j]
            } else {
                0.0
            };
        }
        let mut art_sign = vec![1.0; m];
        let mut tab = vec![0.0; m * width];
        for r in 0..m {
            let mut resid = b[r];
            for j in 0..n {
                resid -= a[r * n + j] * x[j];
            }
            let s = if resid >= 0.0 { 1.0 } else { -1.0 };
            art_sign[r] = s;
            for j in 0..n {
                tab[r * width + j] = s * a[r * n + j];
            }
            tab[r * width + n + r] = 1.0;
            x[n + r] = resid.abs();
        }
        let basis: Vec<usize> = (n..width).collect();
        let mut row_of = vec![None; width];
        for (r, &v) in basis.iter().enumerate() {
            row_of[v] = Some(r);
        }
        Ok(Some(Self {
            m,
            n,
            width,
            a,
            b,
            art_sign,
            tab,
            lower,
            upper,
            x,
            basis,
            row_of,
            cost: vec![0.0; width],
            reduced: vec![0.0; width],
            tol: *tol,
            pivots: 0,
            max_pivots: 50 * width + 1000,
        }))
    }

    fn feasibility_threshold(&self) -> f64 {
        let b_norm = self.b.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        self.tol.feasibility * (1.0 + b_norm)
    }

    fn phase_one(&mut self) -> Result<bool, LpError> {
        if self.m == 0 {
            return Ok(true);
        }
        self.cost = vec![0.0; self.width];
        for j in self.n..self.width {
            self.cost[j] = 1.0;
        }
        self.recompute_reduced();
        let bounded = self.iterate()?;
        debug_assert!(bounded, "phase 1 objective is bounded below by zero");
        self.reinvert()?;
        let infeas: f64 = (self.n..self.width).map(|j| self.x[j].max(0.0)).sum();
        if infeas > self.feasibility_threshold() {
            return Ok(false);
        }
        self.drive_out_artificials()?;
        self.drop_artificials()?;
        Ok(true)
    }

    /// Returns false when the objective is unbounded. Starts from the current
    /// basis, which must be primal feasible and free of artificials.
    fn phase_two(&mut self, cost: &[f64]) -> Result<bool, LpError> {
        self.pivots = 0;
        self.cost = cost.to_vec();
        self.recompute_reduced();
        let bounded = self.iterate()?;
        if bounded {
            self.refresh_values()?;
        }
        Ok(bounded)
    }

    fn structural_point(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x[..self.n])
    }

    fn recompute_reduced(&mut self) {
        let w = self.width;
        let mut d = self.cost.clone();
        for r in 0..self.m {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.tab[r * w..(r + 1) * w];
                for (dj, t) in d.iter_mut().zip(row) {
                    *dj -= cb * t;
                }
            }
        }
        for &v in &self.basis {
            d[v] = 0.0;
        }
        self.reduced = d;
    }

    /// Direction in which nonbasic `j` may improve the objective, if any.
    fn improving_direction(&self, j: usize) -> Option<f64> {
        if self.row_of[j].is_some() || self.lower[j] == self.upper[j] {
            return None;
        }
        let d = self.reduced[j];
        let opt = self.tol.optimality;
        let at_lower = self.lower[j].is_finite() && self.x[j] <= self.lower[j];
        let at_upper = self.upper[j].is_finite() && self.x[j] >= self.upper[j];
        if d < -opt && !at_upper {
            Some(1.0)
        } else if d > opt && !at_lower {
            Some(-1.0)
        } else {
            None
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.width {
            if let Some(dir) = self.improving_direction(j) {
                if bland {
                    return Some((j, dir));
                }
                let score = self.reduced[j].abs();
                if score > best_score {
                    best_score = score;
                    best = Some((j, dir));
                }
            }
        }
        best
    }

    /// Runs simplex iterations on the current cost. Returns false on unboundedness.
    fn iterate(&mut self) -> Result<bool, LpError> {
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut since_reinvert = 0usize;
        loop {
            let Some((q, dir)) = self.choose_entering(bland) else {
                return Ok(true);
            };
            if self.pivots >= self.max_pivots {
                return Err(LpError::IterationLimit(self.max_pivots));
            }
            self.pivots += 1;

            let w = self.width;
            let span = self.upper[q] - self.lower[q];
            let mut step = if span.is_finite() { span } else { f64::INFINITY };
            let mut leave: Option<(usize, bool)> = None; // (row, goes to lower)
            let mut leave_alpha = 0.0;
            for r in 0..self.m {
                let alpha = self.tab[r * w + q];
                if alpha.abs() <= self.tol.pivot {
                    continue;
                }
                let v = self.basis[r];
                let rate = alpha * dir; // basic value changes by -rate * t
                let (limit, to_lower) = if rate > 0.0 {
                    if !self.lower[v].is_finite() {
                        continue;
                    }
                    (((self.x[v] - self.lower[v]) / rate).max(0.0), true)
                } else {
                    if !self.upper[v].is_finite() {
                        continue;
                    }
                    (((self.upper[v] - self.x[v]) / -rate).max(0.0), false)
                };
                let tie = (limit - step).abs() <= 1e-12 * (1.0 + step.abs().min(1e300));
                let better = match leave {
                    None => limit <= step || tie,
                    Some((lr, _)) if tie => {
                        if bland {
                            v < self.basis[lr]
                        } else {
                            alpha.abs() > leave_alpha
                        }
                    }
                    Some(_) => limit < step,
                };
                if better {
                    step = limit;
                    leave = Some((r, to_lower));
                    leave_alpha = alpha.abs();
                }
            }
            if !step.is_finite() {
                return Ok(false);
            }

            // Move along the edge.
            if step > 0.0 {
                self.x[q] += dir * step;
                for r in 0..self.m {
                    let alpha = self.tab[r * w + q];
                    if alpha != 0.0 {
                        self.x[self.basis[r]] -= dir * step * alpha;
                    }
                }
            }
            if step <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }

            match leave {
                None => {
                    // Bound flip.
                    self.x[q] = if dir > 0.0 {
                        self.upper[q]
                    } else {
                        self.lower[q]
                    };
                }
                Some((r, to_lower)) => {
                    let v = self.basis[r];
                    self.x[v] = if to_lower { self.lower[v] } else { self.upper[v] };
                    self.pivot(r, q)?;
                    since_reinvert += 1;
                    if since_reinvert >= REINVERT_EVERY {
                        self.reinvert()?;
                        self.recompute_reduced();
                        since_reinvert = 0;
                    }
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) -> Result<(), LpError> {
        let w = self.width;
        let piv = self.tab[r * w + q];
        if piv.abs() <= self.tol.pivot {
            return Err(LpError::NumericalBreakdown(format!(
                "pivot {piv:e} below threshold"
            )));
        }
        let inv = 1.0 / piv;
        for t in &mut self.tab[r * w..(r + 1) * w] {
            *t *= inv;
        }
        let (before, rest) = self.tab.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[q];
            if f != 0.0 {
                for (t, p) in row.iter_mut().zip(prow.iter()) {
                    *t -= f * p;
                }
                row[q] = 0.0;
            }
        }
        let dq = self.reduced[q];
        if dq != 0.0 {
            for (d, p) in self.reduced.iter_mut().zip(prow.iter()) {
                *d -= dq * p;
            }
        }
        let old = self.basis[r];
        self.row_of[old] = None;
        self.basis[r] = q;
        self.row_of[q] = Some(r);
        self.reduced[q] = 0.0;
        Ok(())
    }

    /// Original (scaled) column `j` of `[A | diag(art_sign)]`.
    fn column(&self, j: usize) -> DVector<f64> {
        if j < self.n {
            DVector::from_fn(self.m, |i, _| self.a[i * self.n + j])
        } else {
            let mut e = DVector::zeros(self.m);
            e[j - self.n] = self.art_sign[j - self.n];
            e
        }
    }

    /// Rebuilds the tableau and basic values from an LU factorization of the basis.
    fn reinvert(&mut self) -> Result<(), LpError> {
        let (m, w) = (self.m, self.width);
        if m == 0 {
            return Ok(());
        }
        let lu = self.basis_matrix().lu();
        let mut full = DMatrix::zeros(m, w);
        for i in 0..m {
            for j in 0..self.n {
                full[(i, j)] = self.a[i * self.n + j];
            }
            if w > self.n {
                full[(i, self.n + i)] = self.art_sign[i];
            }
        }
        let Some(t) = lu.solve(&full) else {
            return Err(LpError::NumericalBreakdown("singular basis".into()));
        };
        if t.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NumericalBreakdown("ill-conditioned basis".into()));
        }
        for i in 0..m {
            for j in 0..w {
                self.tab[i * w + j] = t[(i, j)];
            }
        }
        self.solve_basic_values(&lu)
    }

    /// Recomputes the basic values from the nonbasic ones without rebuilding
    /// the tableau.
    fn refresh_values(&mut self) -> Result<(), LpError> {
        if self.m == 0 {
            return Ok(());
        }
        let lu = self.basis_matrix().lu();
        self.solve_basic_values(&lu)
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        let mut bmat = DMatrix::zeros(self.m, self.m);
        for (r, &v) in self.basis.iter().enumerate() {
            bmat.set_column(r, &self.column(v));
        }
        bmat
    }

    fn solve_basic_values(
        &mut self,
        lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    ) -> Result<(), LpError> {
        let mut rhs = DVector::from_column_slice(&self.b);
        for j in 0..self.width {
            if self.row_of[j].is_none() && self.x[j] != 0.0 {
                rhs -= self.column(j) * self.x[j];
            }
        }
        let xb = lu
            .solve(&rhs)
            .ok_or_else(|| LpError::NumericalBreakdown("singular basis".into()))?;
        for (r, &v) in self.basis.iter().enumerate() {
            self.x[v] = xb[r];
        }
        Ok(())
    }

    fn drive_out_artificials(&mut self) -> Result<(), LpError> {
        let w = self.width;
        for r in 0..self.m {
            if self.basis[r] < self.n {
                continue;
            }
            let mut best = None;
            let mut best_mag = 1e-9;
            for j in 0..self.n {
                if self.row_of[j].is_some() {
                    continue;
                }
                let mag = self.tab[r * w + j].abs();
                if mag > best_mag {
                    best_mag = mag;
                    best = Some(j);
                }
            }
            if let Some(j) = best {
                let art = self.basis[r];
                self.x[art] = 0.0;
                self.pivot(r, j)?;
            }
            // Otherwise the row is redundant; the artificial stays basic at zero.
        }
        Ok(())
    }

    /// Removes the artificial columns and the rows whose artificial is still
    /// basic (those rows are linear combinations of the others), then rebuilds
    /// the tableau. Afterwards `width == n`.
    fn drop_artificials(&mut self) -> Result<(), LpError> {
        let n = self.n;
        let mut keep_row = vec![true; self.m];
        for &v in &self.basis {
            if v >= n {
                keep_row[v - n] = false;
            }
        }
        let rows: Vec<usize> = (0..self.m).filter(|&i| keep_row[i]).collect();
        let m = rows.len();
        let mut a = Vec::with_capacity(m * n);
        let mut b = Vec::with_capacity(m);
        for &i in &rows {
            a.extend_from_slice(&self.a[i * n..(i + 1) * n]);
            b.push(self.b[i]);
        }
        let basis: Vec<usize> = self.basis.iter().copied().filter(|&v| v < n).collect();
        debug_assert_eq!(basis.len(), m);
        let mut row_of = vec![None; n];
        for (r, &v) in basis.iter().enumerate() {
            row_of[v] = Some(r);
        }
        self.m = m;
        self.width = n;
        self.a = a;
        self.b = b;
        self.art_sign.clear();
        self.tab = vec![0.0; m * n];
        self.lower.truncate(n);
        self.upper.truncate(n);
        self.x.truncate(n);
        self.basis = basis;
        self.row_of = row_of;
        self.cost = vec![0.0; n];
        self.reduced = vec![0.0; n];
        self.reinvert()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn box_corner() {
        let p = LpProblem::new(
            dv(&[1.0]),
            DMatrix::zeros(0, 1),
            dv(&[]),
            dv(&[-1.0]),
            dv(&[1.0]),
            Sense::Minimize,
        )
        .unwrap();
        let r = solve_lp(&p).unwrap();
        assert_eq!(r.value(), Some(-1.0));
        assert_eq!(r.point().unwrap()[0], -1.0);
    }

    #[test]
    fn contradictory_equality() {
        let p = LpProblem::new(
            dv(&[1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            dv(&[5.0]),
            dv(&[-1.0]),
            dv(&[1.0]),
            Sense::Minimize,
        )
        .unwrap();
        assert_eq!(solve_lp(&p).unwrap(), LpResult::Infeasible);
    }

    #[test]
    fn feasibility_examples() {
        let p = LpProblem::feasibility(
            DMatrix::zeros(0, 3),
            dv(&[]),
            dv(&[-1.0; 3]),
            dv(&[1.0; 3]),
        )
        .unwrap();
        assert!(is_feasible(&p).unwrap());
        let p = LpProblem::feasibility(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            dv(&[3.0]),
            dv(&[-1.0; 2]),
            dv(&[1.0; 2]),
        )
        .unwrap();
        assert!(!is_feasible(&p).unwrap());
    }

    #[test]
    fn zero_row_with_nonzero_rhs_is_infeasible() {
        let p = LpProblem::feasibility(
            DMatrix::zeros(1, 2),
            dv(&[1.0]),
            dv(&[-1.0; 2]),
            dv(&[1.0; 2]),
        )
        .unwrap();
        assert!(!is_feasible(&p).unwrap());
    }

    #[test]
    fn free_variables_and_unboundedness() {
        // min x0 with x0 - x1 = 0, x1 free: unbounded.
        let inf = f64::INFINITY;
        let p = LpProblem::new(
            dv(&[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            dv(&[0.0]),
            dv(&[-inf, -inf]),
            dv(&[inf, inf]),
            Sense::Minimize,
        )
        .unwrap();
        assert_eq!(solve_lp(&p).unwrap(), LpResult::Unbounded);

        // Same but x1 ∈ [-2, 3]: optimum -2.
        let p = LpProblem::new(
            dv(&[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            dv(&[0.0]),
            dv(&[-inf, -2.0]),
            dv(&[inf, 3.0]),
            Sense::Minimize,
        )
        .unwrap();
        let r = solve_lp(&p).unwrap();
        assert!((r.value().unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn maximize_with_redundant_rows() {
        // x0 + x1 = 1 stated twice; max x0 - x1 on [0,1]².
        let p = LpProblem::new(
            dv(&[1.0, -1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]),
            dv(&[1.0, 2.0]),
            dv(&[0.0, 0.0]),
            dv(&[1.0, 1.0]),
            Sense::Maximize,
        )
        .unwrap();
        let r = solve_lp(&p).unwrap();
        assert!((r.value().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let err = LpProblem::new(
            dv(&[1.0]),
            DMatrix::zeros(0, 2),
            dv(&[]),
            dv(&[0.0]),
            dv(&[1.0]),
            Sense::Minimize,
        )
        .unwrap_err();
        assert!(matches!(err, LpError::Dimension(_)));
        let err = LpProblem::new(
            dv(&[1.0]),
            DMatrix::zeros(0, 1),
            dv(&[]),
            dv(&[2.0]),
            dv(&[1.0]),
            Sense::Minimize,
        )
        .unwrap_err();
        assert!(matches!(err, LpError::InvalidBounds { index: 0, .. }));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic Beale cycling example in equality form with slacks.
        let a = DMatrix::from_row_slice(
            3,
            7,
            &[
                0.25, -8.0, -1.0, 9.0, 1.0, 0.0, 0.0, //
                0.5, -12.0, -0.5, 3.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0,
            ],
        );
        let inf = f64::INFINITY;
        let p = LpProblem::new(
            dv(&[-0.75, 20.0, -0.5, 6.0, 0.0, 0.0, 0.0]),
            a,
            dv(&[0.0, 0.0, 1.0]),
            dv(&[0.0; 7]),
            dv(&[inf; 7]),
            Sense::Minimize,
        )
        .unwrap();
        let r = solve_lp(&p).unwrap();
        assert!((r.value().unwrap() + 1.25).abs() < 1e-9);
    }
}
