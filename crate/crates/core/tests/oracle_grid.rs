use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zonosmooth::cz::{ConstrainedZonotope, IntervalBox};
use zonosmooth::interval1d::{run_filter_1d, run_smoother_1d, Interval};
use zonosmooth::model::{presets, simulate_linear_trial, simulate_scalar_trial};
use zonosmooth::oracle::{
    grid_filter, grid_filter_1d, grid_smooth, grid_smooth_1d, oracle_domain, CellRule, GridSet,
};
use zonosmooth::sampling::sample_member;
use zonosmooth::smf::run_filter;
use zonosmooth::sms::run_smoother;

struct Exact {
    posteriors: Vec<ConstrainedZonotope>,
    smoothed: Vec<ConstrainedZonotope>,
    measurements: Vec<DVector<f64>>,
}

fn exact(seed: u64, horizon: usize) -> Exact {
    let sys = presets::rotation_system();
    let traj = simulate_linear_trial(&sys, horizon, seed, 0).unwrap();
    let f = run_filter(&sys, &traj.measurements).unwrap();
    let s = run_smoother(&f, &sys).unwrap();
    Exact {
        posteriors: f.into_iter().map(|st| st.posterior).collect(),
        smoothed: s.smoothed,
        measurements: traj.measurements,
    }
}

fn domain(e: &Exact, delta: f64) -> IntervalBox {
    oracle_domain(&ConstrainedZonotope::interval_hulls(&e.posteriors).unwrap(), delta).unwrap()
}

fn face_gap(a: &IntervalBox, b: &IntervalBox) -> f64 {
    (&a.lower - &b.lower).amax().max((&a.upper - &b.upper).amax())
}

#[test]
fn overlap_rule_covers_every_member() {
    let sys = presets::rotation_system();
    let delta = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for seed in [3, 4] {
        let e = exact(seed, 2);
        let d = domain(&e, delta);
        let gf = grid_filter(&sys, &e.measurements, &d, delta, CellRule::Overlap).unwrap();
        let gs = grid_smooth(&gf, &sys, CellRule::Overlap).unwrap();
        for (sets, grids) in [(&e.posteriors, &gf), (&e.smoothed, &gs)] {
            for (z, g) in sets.iter().zip(grids.iter()) {
                for _ in 0..300 {
                    let (x, _) = sample_member(z, &mut rng).unwrap();
                    let idx = g.cell_of(&x).expect("domain covers the set");
                    assert!(g.is_marked(idx), "seed {seed}: member {x} not covered");
                }
            }
        }
    }
}

#[test]
fn center_rule_cells_are_near_the_exact_sets() {
    let sys = presets::rotation_system();
    let delta = 0.1;
    let e = exact(5, 2);
    let d = domain(&e, delta);
    let gf = grid_filter(&sys, &e.measurements, &d, delta, CellRule::Center).unwrap();
    let gs = grid_smooth(&gf, &sys, CellRule::Center).unwrap();
    let slack = IntervalBox::cube(2, -delta, delta).unwrap().to_zonotope();
    for (sets, grids) in [(&e.posteriors, &gf), (&e.smoothed, &gs)] {
        for (z, g) in sets.iter().zip(grids.iter()) {
            let grown = z.minkowski_sum(&slack).unwrap();
            for c in g.marked_centers() {
                assert!(grown.contains_point(&c).unwrap(), "{c}");
            }
        }
    }
}

#[test]
fn refining_the_lattice_keeps_hulls_within_two_cells() {
    let sys = presets::rotation_system();
    let e = exact(6, 2);
    let exact_f = ConstrainedZonotope::interval_hulls(&e.posteriors).unwrap();
    let exact_s = ConstrainedZonotope::interval_hulls(&e.smoothed).unwrap();
    let mut gaps = Vec::new();
    for delta in [0.2, 0.1, 0.05] {
        let d = domain(&e, delta);
        let gf = grid_filter(&sys, &e.measurements, &d, delta, CellRule::Center).unwrap();
        let gs = grid_smooth(&gf, &sys, CellRule::Center).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..=2 {
            worst = worst
                .max(face_gap(&exact_f[k], &gf[k].hull().unwrap()))
                .max(face_gap(&exact_s[k], &gs[k].hull().unwrap()));
        }
        assert!(worst <= 2.0 * delta, "delta {delta}: gap {worst}");
        gaps.push(worst);
    }
    assert!(gaps[2] < gaps[0], "{gaps:?}");
}

#[test]
fn scalar_oracle_covers_members() {
    let sys = presets::cube_root_system();
    let delta = 0.01;
    for trial in 0..10 {
        let traj = simulate_scalar_trial(&sys, 3, 12, trial).unwrap();
        let ys = traj.scalar_measurements();
        let f = run_filter_1d(&sys, &ys).unwrap();
        let s = run_smoother_1d(&f, &sys).unwrap();
        let hulls: Vec<IntervalBox> = f
            .iter()
            .map(|st| IntervalBox::from_slices(&[st.posterior.lo()], &[st.posterior.hi()]).unwrap())
            .collect();
        let d = oracle_domain(&hulls, delta).unwrap();
        let gf = grid_filter_1d(&sys, &ys, &Interval::new(d.lower[0], d.upper[0]).unwrap(), delta).unwrap();
        let gs = grid_smooth_1d(&gf, &sys).unwrap();
        for k in 0..=3 {
            for (iv, g) in [(f[k].posterior, &gf[k]), (s[k], &gs[k])] {
                for i in 0..=20 {
                    let x = iv.lo() + iv.width() * i as f64 / 20.0;
                    let idx = g.cell_of(&DVector::from_element(1, x)).unwrap();
                    assert!(g.is_marked(idx), "trial {trial} k {k} x {x}");
                }
            }
        }
    }
}

#[test]
fn lattice_indexing_roundtrips() {
    let d = IntervalBox::from_slices(&[-1.0, 0.0], &[1.0, 0.5]).unwrap();
    let g = GridSet::empty(&d, 0.25).unwrap();
    assert_eq!(g.num_cells(), 9 * 3);
    for idx in 0..g.num_cells() {
        assert_eq!(g.cell_of(&g.center(idx)), Some(idx));
    }
    assert_eq!(g.cell_of(&DVector::from_column_slice(&[5.0, 0.0])), None);
    let tiny = IntervalBox::cube(2, 0.0, 1.0).unwrap();
    assert!(GridSet::empty(&tiny, 1e-4).is_err());
}
