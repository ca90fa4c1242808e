//! Test-only oracles, independent of the simplex implementation.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Every basic feasible point of `{A x = b, l ≤ x ≤ u}` (finite bounds only).
///
/// A vertex is determined by a set `B` of linearly independent columns whose
/// variables sit strictly between their bounds, with all remaining variables at
/// one of their bounds. We enumerate every column subset of size ≤ rank and
/// every bound assignment of the complement, keep solutions that are unique and
/// feasible.
pub fn enumerate_vertices(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lower: &[f64],
    upper: &[f64],
) -> Vec<DVector<f64>> {
    let n = a.ncols();
    let m = a.nrows();
    assert!(n <= 12, "enumeration is exponential");
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let basic: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        if basic.len() > m {
            continue;
        }
        let nonbasic: Vec<usize> = (0..n).filter(|j| mask & (1 << j) == 0).collect();
        let ab = DMatrix::from_fn(m, basic.len(), |i, k| a[(i, basic[k])]);
        if !basic.is_empty() {
            let svd = ab.clone().svd(false, false);
            let smin = svd.singular_values.min();
            if smin < 1e-9 {
                continue;
            }
        }
        for bounds in 0u32..(1 << nonbasic.len()) {
            let mut x = DVector::zeros(n);
            for (k, &j) in nonbasic.iter().enumerate() {
                x[j] = if bounds & (1 << k) != 0 { upper[j] } else { lower[j] };
            }
            let rhs = b - a * &x;
            if !basic.is_empty() {
                let xb = match ab.clone().svd(true, true).solve(&rhs, 1e-12) {
                    Ok(v) => v,
                    Err(_) => continue,
                };
                for (k, &j) in basic.iter().enumerate() {
                    x[j] = xb[k];
                }
            }
            let resid = (a * &x - b).amax();
            let inside = (0..n).all(|j| x[j] >= lower[j] - 1e-9 && x[j] <= upper[j] + 1e-9);
            if resid <= 1e-9 && inside {
                out.push(x);
            }
        }
    }
    out
}

/// Brute-force `min cᵀx` over the vertex set; `None` if infeasible.
pub fn brute_force_min(
    c: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lower: &[f64],
    upper: &[f64],
) -> Option<f64> {
    enumerate_vertices(a, b, lower, upper)
        .iter()
        .map(|x| c.dot(x))
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
}

/// Random small LP data. Roughly half the instances are built around a known
/// feasible point, the rest have arbitrary right-hand sides.
pub struct RandomLp {
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub fn random_lp<R: Rng>(rng: &mut R, max_vars: usize, max_rows: usize) -> RandomLp {
    let n = rng.random_range(1..=max_vars);
    let m = rng.random_range(0..=max_rows.min(n));
    let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..0.5)).collect();
    let upper: Vec<f64> = lower
        .iter()
        .map(|l| l + rng.random_range(0.0..3.0))
        .collect();
    let a = DMatrix::from_fn(m, n, |_, _| {
        if rng.random_bool(0.2) {
            0.0
        } else {
            rng.random_range(-2.0..2.0)
        }
    });
    let b = if rng.random_bool(0.6) {
        let x0 = DVector::from_fn(n, |j, _| rng.random_range(lower[j]..=upper[j]));
        &a * x0
    } else {
        DVector::from_fn(m, |_, _| rng.random_range(-4.0..4.0))
    };
    let c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    RandomLp {
        c,
        a,
        b,
        lower,
        upper,
    }
}

use zonosmooth::cz::ConstrainedZonotope;

/// Sign convention for the process-noise block of the smoothing step.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NoiseSign {
    /// Noise block `+Â_w`, right-hand side `+Γ ĉ_w`: describes `Φ x ∈ S ⊕ Γ W`.
    AsWritten,
    /// Noise block `-Â_w`, right-hand side `-Γ ĉ_w`: describes `Φ x ∈ S ⊕ Γ(-W)`.
    Reflected,
}

/// The smoothing-step quintuple assembled block by block:
///
/// ```text
/// G̃ = [Ĝ_k 0 0], c̃ = ĉ_k, h̃ = [ĥ_k; h̃'; ĥ_w]
/// Ã = [Â_k 0 0; 0 Ã' 0; 0 0 ±Â_w; Φ Ĝ_k  -G̃'  -Γ Ĝ_w]
/// b̃ = [b̂_k; b̃'; b̂_w; c̃' ± Γ ĉ_w - Φ ĉ_k]
/// ```
pub fn literal_smooth_blocks(
    post: &ConstrainedZonotope,
    next: &ConstrainedZonotope,
    phi: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    w: &ConstrainedZonotope,
    sign: NoiseSign,
) -> ConstrainedZonotope {
    let s = match sign {
        NoiseSign::AsWritten => 1.0,
        NoiseSign::Reflected => -1.0,
    };
    let n = post.dim();
    let (g1, g2, g3) = (post.num_generators(), next.num_generators(), w.num_generators());
    let (c1, c2, c3) = (post.num_constraints(), next.num_constraints(), w.num_constraints());
    let ng = g1 + g2 + g3;
    let nc = c1 + c2 + c3 + n;

    let mut g = DMatrix::zeros(n, ng);
    for i in 0..n {
        for j in 0..g1 {
            g[(i, j)] = post.generators()[(i, j)];
        }
    }
    let mut a = DMatrix::zeros(nc, ng);
    for i in 0..c1 {
        for j in 0..g1 {
            a[(i, j)] = post.constraints()[(i, j)];
        }
    }
    for i in 0..c2 {
        for j in 0..g2 {
            a[(c1 + i, g1 + j)] = next.constraints()[(i, j)];
        }
    }
    for i in 0..c3 {
        for j in 0..g3 {
            a[(c1 + c2 + i, g1 + g2 + j)] = s * w.constraints()[(i, j)];
        }
    }
    let pg = phi * post.generators();
    let gg = gamma * w.generators();
    let row = c1 + c2 + c3;
    for i in 0..n {
        for j in 0..g1 {
            a[(row + i, j)] = pg[(i, j)];
        }
        for j in 0..g2 {
            a[(row + i, g1 + j)] = -next.generators()[(i, j)];
        }
        for j in 0..g3 {
            a[(row + i, g1 + g2 + j)] = -gg[(i, j)];
        }
    }
    let coupling = next.center() + gamma * w.center() * s - phi * post.center();
    let b = DVector::from_iterator(
        nc,
        post.rhs()
            .iter()
            .chain(next.rhs().iter())
            .chain(w.rhs().iter())
            .chain(coupling.iter())
            .copied(),
    );
    let h = DVector::from_iterator(
        ng,
        post.half_widths()
            .iter()
            .chain(next.half_widths().iter())
            .chain(w.half_widths().iter())
            .copied(),
    );
    ConstrainedZonotope::new(g, post.center().clone(), a, b, h).unwrap()
}
