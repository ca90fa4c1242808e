//! Point samplers for constrained zonotopes, used by soundness tests.
//!
//! Not uniform and not meant for estimation. Unconstrained sets are sampled by
//! drawing ξ uniformly in the factor box (infinite half-widths are truncated to
//! `[-1, 1]`). For constrained sets a box draw is projected onto `{A ξ = b}` and
//! rejected if it leaves the box; after a bounded number of rejections the
//! sampler falls back to a random convex combination of LP vertices.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::cz::ConstrainedZonotope;
use crate::lp::{self, LpProblem, LpResult, Sense};

const PROJECTION_ATTEMPTS: usize = 64;
const VERTEX_COUNT: usize = 4;

/// Factor-space tolerance accepted for sampled ξ.
pub const FACTOR_TOLERANCE: f64 = 1e-9;

fn truncated_bounds(z: &ConstrainedZonotope) -> DVector<f64> {
    z.half_widths().map(|h| if h.is_finite() { h } else { 1.0 })
}

fn draw_box<R: Rng + ?Sized>(rng: &mut R, h: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(h.len(), |j, _| {
        if h[j] > 0.0 {
            rng.random_range(-h[j]..=h[j])
        } else {
            0.0
        }
    })
}

/// True if ξ satisfies `A ξ = b` and the box bounds within [`FACTOR_TOLERANCE`].
pub fn factor_is_feasible(z: &ConstrainedZonotope, xi: &DVector<f64>) -> bool {
    let h = z.half_widths();
    let in_box = (0..xi.len()).all(|j| xi[j].abs() <= h[j] + FACTOR_TOLERANCE);
    let resid = if z.num_constraints() == 0 {
        0.0
    } else {
        (z.constraints() * xi - z.rhs()).amax()
    };
    in_box && resid <= FACTOR_TOLERANCE * (1.0 + z.rhs().amax())
}

/// A feasible factor vector ξ, or `None` if the set is empty.
pub fn sample_factor<R: Rng + ?Sized>(
    z: &ConstrainedZonotope,
    rng: &mut R,
) -> Option<DVector<f64>> {
    let h = truncated_bounds(z);
    if z.num_constraints() == 0 {
        return Some(draw_box(rng, &h));
    }
    let a = z.constraints();
    let pinv = a.clone().pseudo_inverse(1e-12).ok()?;
    for _ in 0..PROJECTION_ATTEMPTS {
        let xi = draw_box(rng, &h);
        let projected = &xi - &pinv * (a * &xi - z.rhs());
        if factor_is_feasible(z, &projected) {
            return Some(projected);
        }
    }
    vertex_combination(z, &h, rng)
}

fn vertex_combination<R: Rng + ?Sized>(
    z: &ConstrainedZonotope,
    h: &DVector<f64>,
    rng: &mut R,
) -> Option<DVector<f64>> {
    let n_g = z.num_generators();
    let mut vertices: Vec<DVector<f64>> = Vec::with_capacity(VERTEX_COUNT);
    for _ in 0..VERTEX_COUNT {
        let c = DVector::from_fn(n_g, |_, _| rng.random_range(-1.0..1.0));
        let p = LpProblem::new(
            c,
            z.constraints().clone(),
            z.rhs().clone(),
            -h,
            h.clone(),
            Sense::Minimize,
        )
        .ok()?;
        match lp::solve_lp(&p).ok()? {
            LpResult::Optimal { point, .. } => vertices.push(point),
            _ => return None,
        }
    }
    let weights: Vec<f64> = (0..vertices.len()).map(|_| rng.random::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    let mut xi = DVector::zeros(n_g);
    for (w, v) in weights.iter().zip(&vertices) {
        xi += v * (w / total);
    }
    // Clamp round-off so the box check holds exactly.
    for j in 0..n_g {
        xi[j] = xi[j].clamp(-h[j], h[j]);
    }
    factor_is_feasible(z, &xi).then_some(xi)
}

/// A member `G ξ + c` of the set together with its factor vector.
pub fn sample_member<R: Rng + ?Sized>(
    z: &ConstrainedZonotope,
    rng: &mut R,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let xi = sample_factor(z, rng)?;
    Some((z.generators() * &xi + z.center(), xi))
}

/// Random constrained zonotope with `n_c` constraints built around a known
/// feasible factor vector, so the result is never empty.
pub fn random_nonempty<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    n_g: usize,
    n_c: usize,
) -> ConstrainedZonotope {
    let generators = DMatrix::from_fn(n, n_g, |_, _| rng.random_range(-1.0..1.0));
    let center = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let h = DVector::from_fn(n_g, |_, _| rng.random_range(0.2..1.5));
    let a = DMatrix::from_fn(n_c, n_g, |_, _| rng.random_range(-1.0..1.0));
    let anchor = DVector::from_fn(n_g, |j, _| 0.5 * rng.random_range(-h[j]..h[j]));
    let b = &a * anchor;
    ConstrainedZonotope::new(generators, center, a, b, h).expect("consistent by construction")
}
