//! Brute-force lattice evaluation of the optimal filtering and smoothing
//! recursions on small instances, used as ground truth in tests.
//!
//! A lattice point `x` stands for its cell `C(x) = x + [-Δ/2, Δ/2]ⁿ`. Every
//! relation of the exact recursion is tested between cells rather than points:
//! a cell is marked when *some* point of it satisfies the relation with *some*
//! point of a marked cell. For the linear system this reduces to zonotope
//! membership of a center difference, e.g. a cell survives prediction iff
//!
//! ```text
//! x − Φ x′ ∈ Γ⟦w⟧ ⊕ Φ U ⊕ U,   U = [-Δ/2, Δ/2]ⁿ
//! ```
//!
//! for a marked `x′`. Under this [`CellRule::Overlap`] the marked cells cover
//! every point of the exact range that lies in the domain box, but the slack
//! compounds over steps (about `Δ` per face per step).
//!
//! [`CellRule::Center`] tests lattice centers exactly and only widens the
//! relation by the cell of the set it reads from (`x − Φ x′ ∈ Γ⟦w⟧ ⊕ Φ U` for
//! prediction, `y − Ξ x ∈ Ψ⟦v⟧` for the update, `x″ − Φ x ∈ Γ⟦w⟧ ⊕ U` for
//! smoothing). It is not a guaranteed cover, but its error stays within about
//! one cell, which makes it the sharper reference for hull comparisons.
//!
//! Both rules converge to the exact range as `Δ → 0`. Only state and
//! measurement dimensions 1 and 2 are supported.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::cz::{ConstrainedZonotope, IntervalBox};
use crate::interval1d::{Interval, MonotoneMap};
use crate::model::{LinearSystem, ModelError, ScalarAffineSystem};

/// Grids above this many cells are refused.
pub const MAX_CELLS: usize = 10_000_000;

/// Samples per cell (besides the endpoints) when imaging a cell through `η`.
const IMAGE_SAMPLES: usize = 8;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("grid of {cells} cells exceeds the limit of {MAX_CELLS}")]
    TooManyCells { cells: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid set at step {k} is empty")]
    EmptySet { k: usize },
    #[error("unsupported instance: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("csv export failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// How relations between lattice cells are evaluated; see the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellRule {
    Overlap,
    Center,
}

/// A set of marked cells on a regular lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSet {
    origin: DVector<f64>,
    spacing: f64,
    counts: Vec<usize>,
    mask: Vec<bool>,
}

impl GridSet {
    /// Empty set on the lattice whose cell centers start at `domain.lower` and
    /// cover `domain` with spacing `delta`.
    pub fn empty(domain: &IntervalBox, delta: f64) -> Result<Self, OracleError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(OracleError::InvalidGrid(format!("spacing {delta} must be positive")));
        }
        let widths = domain.widths();
        if widths.iter().any(|w| !w.is_finite()) {
            return Err(OracleError::InvalidGrid("domain must be bounded".into()));
        }
        let counts: Vec<usize> = widths.iter().map(|w| (w / delta).ceil() as usize + 1).collect();
        let cells: f64 = counts.iter().map(|&c| c as f64).product();
        if cells > MAX_CELLS as f64 {
            return Err(OracleError::TooManyCells { cells });
        }
        Ok(Self {
            origin: domain.lower.clone(),
            spacing: delta,
            mask: vec![false; cells as usize],
            counts,
        })
    }

    pub fn full(domain: &IntervalBox, delta: f64) -> Result<Self, OracleError> {
        let mut g = Self::empty(domain, delta)?;
        g.mask.fill(true);
        Ok(g)
    }

    fn cleared(&self) -> Self {
        Self {
            mask: vec![false; self.mask.len()],
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn num_cells(&self) -> usize {
        self.mask.len()
    }

    pub fn num_marked(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    pub fn is_marked(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn set(&mut self, idx: usize, marked: bool) {
        self.mask[idx] = marked;
    }

    fn unflatten(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for (i, &c) in self.counts.iter().enumerate() {
            out[i] = idx % c;
            idx /= c;
        }
        out
    }

    fn flatten(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for i in (0..self.dim()).rev() {
            idx = idx * self.counts[i] + multi[i];
        }
        idx
    }

    pub fn center(&self, idx: usize) -> DVector<f64> {
        let multi = self.unflatten(idx);
        DVector::from_fn(self.dim(), |i, _| self.origin[i] + self.spacing * multi[i] as f64)
    }

    /// Index of the cell whose center is nearest to `x`, if `x` lies within half
    /// a spacing of the lattice.
    pub fn cell_of(&self, x: &DVector<f64>) -> Option<usize> {
        if x.len() != self.dim() {
            return None;
        }
        let mut multi = vec![0; self.dim()];
        for i in 0..self.dim() {
            let t = ((x[i] - self.origin[i]) / self.spacing).round();
            if !(t >= 0.0 && t < self.counts[i] as f64) {
                return None;
            }
            multi[i] = t as usize;
        }
        Some(self.flatten(&multi))
    }

    /// Centers of all marked cells, in index order.
    pub fn marked_centers(&self) -> Vec<DVector<f64>> {
        (0..self.num_cells())
            .filter(|&i| self.mask[i])
            .map(|i| self.center(i))
            .collect()
    }

    /// Indices of the cells whose centers lie in `[lo, hi]` (boundary cells are
    /// included up to round-off).
    fn cells_in(&self, lo: &DVector<f64>, hi: &DVector<f64>) -> Vec<usize> {
        let n = self.dim();
        let mut ranges = Vec::with_capacity(n);
        for i in 0..n {
            let a = ((lo[i] - self.origin[i]) / self.spacing - 1e-9).ceil().max(0.0);
            let b = ((hi[i] - self.origin[i]) / self.spacing + 1e-9)
                .floor()
                .min(self.counts[i] as f64 - 1.0);
            if a > b {
                return Vec::new();
            }
            ranges.push((a as usize, b as usize));
        }
        let mut out = Vec::new();
        let mut multi: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            out.push(self.flatten(&multi));
            let mut i = 0;
            loop {
                if i == n {
                    return out;
                }
                if multi[i] < ranges[i].1 {
                    multi[i] += 1;
                    break;
                }
                multi[i] = ranges[i].0;
                i += 1;
            }
        }
    }

    /// Box over the marked cells (centers ± Δ/2).
    pub fn hull(&self) -> Option<IntervalBox> {
        let n = self.dim();
        let mut lo = DVector::from_element(n, f64::INFINITY);
        let mut hi = DVector::from_element(n, f64::NEG_INFINITY);
        for idx in (0..self.num_cells()).filter(|&i| self.mask[i]) {
            let c = self.center(idx);
            lo = lo.inf(&c);
            hi = hi.sup(&c);
        }
        if lo[0] > hi[0] {
            return None;
        }
        let half = DVector::from_element(n, 0.5 * self.spacing);
        Some(IntervalBox {
            lower: lo - &half,
            upper: hi + half,
        })
    }

    /// Marked-cell centers as `x1,…,xn` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), OracleError> {
        writeln!(out, "{}", crate::CSV_HEADER)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record((1..=self.dim()).map(|i| format!("x{i}")))?;
        for c in self.marked_centers() {
            w.write_record(c.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Union of the boxes grown by 10% of their width plus `4Δ` on every face.
pub fn oracle_domain(hulls: &[IntervalBox], delta: f64) -> Option<IntervalBox> {
    let first = hulls.first()?;
    let union = hulls.iter().skip(1).fold(first.clone(), |acc, h| acc.union(h));
    let margin = union.widths() * 0.1 + DVector::from_element(union.dim(), 4.0 * delta);
    Some(union.inflate(&margin))
}

/// Exact membership test for a zonotope in dimension 1 or 2, via its
/// half-plane representation (edges are parallel to the generators).
struct ZonotopeTest {
    center: DVector<f64>,
    normals: Vec<(DVector<f64>, f64)>,
}

impl ZonotopeTest {
    fn new(generators: &DMatrix<f64>, center: DVector<f64>) -> Result<Self, OracleError> {
        let n = center.len();
        if n == 0 || n > 2 {
            return Err(OracleError::Unsupported(format!(
                "grid oracle handles dimensions 1 and 2, got {n}"
            )));
        }
        let mut dirs: Vec<DVector<f64>> = (0..n)
            .map(|i| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
        if n == 2 {
            for g in generators.column_iter() {
                let norm = g.norm();
                if norm > 0.0 {
                    dirs.push(DVector::from_column_slice(&[-g[1] / norm, g[0] / norm]));
                }
            }
        }
        let normals = dirs
            .into_iter()
            .map(|d| {
                let bound: f64 = generators.column_iter().map(|g| d.dot(&g).abs()).sum();
                (d, bound)
            })
            .collect();
        Ok(Self { center, normals })
    }

    fn contains(&self, p: &DVector<f64>) -> bool {
        let diff = p - &self.center;
        self.normals
            .iter()
            .all(|(d, bound)| d.dot(&diff).abs() <= bound + 1e-12 * (1.0 + bound))
    }

    fn radius(&self) -> DVector<f64> {
        let n = self.center.len();
        DVector::from_fn(n, |i, _| self.normals[i].1)
    }
}

/// Generators of an unconstrained zonotope with its half-widths folded in.
fn plain_generators(z: &ConstrainedZonotope, what: &str) -> Result<DMatrix<f64>, OracleError> {
    if z.num_constraints() > 0 || z.half_widths().iter().any(|h| !h.is_finite()) {
        return Err(OracleError::Unsupported(format!(
            "{what} must be a bounded zonotope without constraints"
        )));
    }
    let mut g = z.generators().clone();
    for (j, mut col) in g.column_iter_mut().enumerate() {
        col *= z.half_widths()[j];
    }
    Ok(g)
}

fn hstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks[0].nrows();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}

/// `Γ⟦w⟧ ⊕ [Φ U] ⊕ [U]`: admissible center differences `x − Φ x′` of cells
/// related by one transition, with the source and/or target cell slack.
fn transition_test(
    sys: &LinearSystem,
    k: usize,
    delta: f64,
    source_slack: bool,
    target_slack: bool,
) -> Result<(ZonotopeTest, DMatrix<f64>), OracleError> {
    let m = sys.matrices(k)?;
    let n = m.phi.nrows();
    let u = DMatrix::identity(n, n) * (0.5 * delta);
    let mut blocks = vec![&m.gamma * plain_generators(&sys.w_range, "process noise")?];
    if source_slack {
        blocks.push(&m.phi * &u);
    }
    if target_slack {
        blocks.push(u);
    }
    let gens = hstack(&blocks);
    let test = ZonotopeTest::new(&gens, &m.gamma * sys.w_range.center())?;
    Ok((test, m.phi.clone()))
}

fn predict_grid(
    post: &GridSet,
    sys: &LinearSystem,
    k: usize,
    rule: CellRule,
) -> Result<GridSet, OracleError> {
    let (test, phi) = transition_test(sys, k, post.spacing, true, rule == CellRule::Overlap)?;
    let radius = test.radius();
    let mut out = post.cleared();
    for src in (0..post.num_cells()).filter(|&i| post.mask[i]) {
        let image = &phi * post.center(src);
        let mid = &image + &test.center;
        for dst in out.cells_in(&(&mid - &radius), &(&mid + &radius)) {
            if !out.mask[dst] && test.contains(&(out.center(dst) - &image)) {
                out.mask[dst] = true;
            }
        }
    }
    Ok(out)
}

fn update_grid(
    prior: &GridSet,
    y: &DVector<f64>,
    sys: &LinearSystem,
    k: usize,
    rule: CellRule,
) -> Result<GridSet, OracleError> {
    let m = sys.matrices(k)?;
    let n = m.xi.ncols();
    let mut blocks = vec![&m.psi * plain_generators(&sys.v_range, "measurement noise")?];
    if rule == CellRule::Overlap {
        blocks.push(&m.xi * DMatrix::identity(n, n) * (0.5 * prior.spacing));
    }
    let gens = hstack(&blocks);
    let test = ZonotopeTest::new(&gens, &m.psi * sys.v_range.center())?;
    let mut out = prior.cleared();
    for idx in (0..prior.num_cells()).filter(|&i| prior.mask[i]) {
        out.mask[idx] = test.contains(&(y - &m.xi * prior.center(idx)));
    }
    Ok(out)
}

/// Lattice posteriors `⟦x_k | y_{0:k}⟧` for `k = 0..=T` on the given domain.
pub fn grid_filter(
    sys: &LinearSystem,
    measurements: &[DVector<f64>],
    domain: &IntervalBox,
    delta: f64,
    rule: CellRule,
) -> Result<Vec<GridSet>, OracleError> {
    if domain.dim() != sys.state_dim() {
        return Err(OracleError::InvalidGrid(format!(
            "domain has dimension {}, state has {}",
            domain.dim(),
            sys.state_dim()
        )));
    }
    let mut out: Vec<GridSet> = Vec::with_capacity(measurements.len());
    for (k, y) in measurements.iter().enumerate() {
        let prior = match out.last() {
            None => {
                let n = sys.state_dim();
                let mut blocks = vec![plain_generators(&sys.x0_range, "initial range")?];
                if rule == CellRule::Overlap {
                    blocks.push(DMatrix::identity(n, n) * (0.5 * delta));
                }
                let test = ZonotopeTest::new(&hstack(&blocks), sys.x0_range.center().clone())?;
                let mut g = GridSet::empty(domain, delta)?;
                for idx in 0..g.num_cells() {
                    g.mask[idx] = test.contains(&g.center(idx));
                }
                g
            }
            Some(prev) => predict_grid(prev, sys, k - 1, rule)?,
        };
        let post = update_grid(&prior, y, sys, k, rule)?;
        if post.is_empty() {
            return Err(OracleError::EmptySet { k });
        }
        out.push(post);
    }
    Ok(out)
}

/// Backward pass: keep a filtered cell at `k` iff some smoothed cell at `k + 1`
/// is reachable from it.
pub fn grid_smooth(
    filter_sets: &[GridSet],
    sys: &LinearSystem,
    rule: CellRule,
) -> Result<Vec<GridSet>, OracleError> {
    let Some(last) = filter_sets.last() else {
        return Err(OracleError::EmptySet { k: 0 });
    };
    let mut out = vec![last.clone(); filter_sets.len()];
    for k in (0..filter_sets.len() - 1).rev() {
        let filt = &filter_sets[k];
        let next = &out[k + 1];
        let (test, phi) = transition_test(sys, k, filt.spacing, rule == CellRule::Overlap, true)?;
        let radius = test.radius();
        let mut kept = filt.cleared();
        for idx in (0..filt.num_cells()).filter(|&i| filt.mask[i]) {
            let image = &phi * filt.center(idx);
            let mid = &image + &test.center;
            kept.mask[idx] = next
                .cells_in(&(&mid - &radius), &(&mid + &radius))
                .into_iter()
                .any(|dst| next.mask[dst] && test.contains(&(next.center(dst) - &image)));
        }
        if kept.is_empty() {
            return Err(OracleError::EmptySet { k });
        }
        out[k] = kept;
    }
    Ok(out)
}

/// Range of `η` over a cell, from its endpoints and interior samples.
fn cell_image(eta: &MonotoneMap, center: f64, delta: f64) -> (f64, f64) {
    let (a, b) = (center - 0.5 * delta, center + 0.5 * delta);
    (0..=IMAGE_SAMPLES + 1)
        .map(|i| eta.eval(a + (b - a) * i as f64 / (IMAGE_SAMPLES + 1) as f64))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn interval_domain(domain: &Interval) -> IntervalBox {
    IntervalBox {
        lower: DVector::from_element(1, domain.lo()),
        upper: DVector::from_element(1, domain.hi()),
    }
}

/// Scalar counterpart of [`grid_filter`] for `x⁺ = η(x) + w`, `y = αx + v`.
pub fn grid_filter_1d(
    sys: &ScalarAffineSystem,
    measurements: &[f64],
    domain: &Interval,
    delta: f64,
) -> Result<Vec<GridSet>, OracleError> {
    let base = GridSet::empty(&interval_domain(domain), delta)?;
    let half = 0.5 * delta;
    let (w, v, alpha) = (sys.w_range, sys.v_range, sys.meas_gain);
    let mut out: Vec<GridSet> = Vec::with_capacity(measurements.len());
    for (k, &y) in measurements.iter().enumerate() {
        let prior = match out.last() {
            None => {
                let mut g = base.clone();
                for idx in 0..g.num_cells() {
                    let c = g.center(idx)[0];
                    g.mask[idx] = c + half >= sys.x0_range.lo() && c - half <= sys.x0_range.hi();
                }
                g
            }
            Some(prev) => {
                // Difference array: each marked source marks a contiguous run.
                let mut diff = vec![0i64; base.num_cells() + 1];
                for src in (0..prev.num_cells()).filter(|&i| prev.mask[i]) {
                    let (lo, hi) = cell_image(&sys.eta, prev.center(src)[0], delta);
                    let lo = DVector::from_element(1, lo + w.lo() - half);
                    let hi = DVector::from_element(1, hi + w.hi() + half);
                    let cells = base.cells_in(&lo, &hi);
                    if let (Some(&a), Some(&b)) = (cells.first(), cells.last()) {
                        diff[a] += 1;
                        diff[b + 1] -= 1;
                    }
                }
                let mut g = base.clone();
                let mut run = 0;
                for idx in 0..g.num_cells() {
                    run += diff[idx];
                    g.mask[idx] = run > 0;
                }
                g
            }
        };
        let mut post = prior.clone();
        for idx in (0..prior.num_cells()).filter(|&i| prior.mask[i]) {
            let c = prior.center(idx)[0];
            let (p, q) = (y - alpha * (c - half), y - alpha * (c + half));
            post.mask[idx] = p.max(q) >= v.lo() && p.min(q) <= v.hi();
        }
        if post.is_empty() {
            return Err(OracleError::EmptySet { k });
        }
        out.push(post);
    }
    Ok(out)
}

/// Scalar counterpart of [`grid_smooth`].
pub fn grid_smooth_1d(
    filter_sets: &[GridSet],
    sys: &ScalarAffineSystem,
) -> Result<Vec<GridSet>, OracleError> {
    let Some(last) = filter_sets.last() else {
        return Err(OracleError::EmptySet { k: 0 });
    };
    let half = 0.5 * last.spacing;
    let mut out = vec![last.clone(); filter_sets.len()];
    for k in (0..filter_sets.len() - 1).rev() {
        let filt = &filter_sets[k];
        let next = &out[k + 1];
        let mut prefix = vec![0usize; next.num_cells() + 1];
        for idx in 0..next.num_cells() {
            prefix[idx + 1] = prefix[idx] + next.mask[idx] as usize;
        }
        let mut kept = filt.cleared();
        for idx in (0..filt.num_cells()).filter(|&i| filt.mask[i]) {
            let (lo, hi) = cell_image(&sys.eta, filt.center(idx)[0], filt.spacing);
            let lo = DVector::from_element(1, lo + sys.w_range.lo() - half);
            let hi = DVector::from_element(1, hi + sys.w_range.hi() + half);
            let cells = next.cells_in(&lo, &hi);
            if let (Some(&a), Some(&b)) = (cells.first(), cells.last()) {
                kept.mask[idx] = prefix[b + 1] > prefix[a];
            }
        }
        if kept.is_empty() {
            return Err(OracleError::EmptySet { k });
        }
        out[k] = kept;
    }
    Ok(out)
}
