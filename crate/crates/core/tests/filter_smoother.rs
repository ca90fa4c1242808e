mod common;

use common::{literal_smooth_blocks, NoiseSign};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zonosmooth::cz::{ConstrainedZonotope, IntervalBox};
use zonosmooth::model::{presets, simulate_linear_trial, LinearSystem, StepMatrices};
use zonosmooth::sampling::{random_nonempty, sample_member};
use zonosmooth::smf::run_filter;
use zonosmooth::sms::{run_smoother, run_smoother_shared, smooth_step};

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn scalar_walk(w_lo: f64, w_hi: f64) -> LinearSystem {
    let one = DMatrix::identity(1, 1);
    LinearSystem::new(
        StepMatrices {
            phi: one.clone(),
            gamma: one.clone(),
            xi: one.clone(),
            psi: one,
        },
        IntervalBox::from_slices(&[w_lo], &[w_hi]).unwrap().to_zonotope(),
        IntervalBox::cube(1, -0.5, 0.5).unwrap().to_zonotope(),
        IntervalBox::cube(1, -1.0, 1.0).unwrap().to_zonotope(),
    )
    .unwrap()
}

#[test]
fn true_states_stay_inside_both_estimates() {
    let sys = presets::rotation_system();
    for trial in 0..5 {
        let traj = simulate_linear_trial(&sys, 20, 99, trial).unwrap();
        let f = run_filter(&sys, &traj.measurements).unwrap();
        let s = run_smoother_shared(&f).unwrap();
        for (k, x) in traj.states.iter().enumerate() {
            assert!(f[k].posterior.contains_point(x).unwrap(), "trial {trial} k {k}");
            assert!(s.smoothed[k].contains_point(x).unwrap(), "trial {trial} k {k}");
        }
    }
}

#[test]
fn recursive_and_shared_smoothers_agree() {
    let sys = presets::rotation_system();
    for trial in 0..3 {
        let traj = simulate_linear_trial(&sys, 8, 5, trial).unwrap();
        let f = run_filter(&sys, &traj.measurements).unwrap();
        let rec = run_smoother(&f, &sys).unwrap();
        let shared = run_smoother_shared(&f).unwrap();
        let hr = ConstrainedZonotope::interval_hulls(&rec.smoothed).unwrap();
        let hs = ConstrainedZonotope::interval_hulls(&shared.smoothed).unwrap();
        for (k, (a, b)) in hr.iter().zip(&hs).enumerate() {
            let gap = (&a.lower - &b.lower).amax().max((&a.upper - &b.upper).amax());
            assert!(gap < 1e-7, "trial {trial} k {k}: {gap}");
        }
        // The recursive sets really are larger.
        assert!(rec.smoothed[0].num_generators() > shared.smoothed[0].num_generators());
        for (k, x) in traj.states.iter().enumerate() {
            assert!(rec.smoothed[k].contains_point(x).unwrap());
        }
    }
}

#[test]
fn recursive_sizes_follow_the_block_layout() {
    let sys = presets::rotation_system();
    let t = 6;
    let traj = simulate_linear_trial(&sys, t, 1, 0).unwrap();
    let f = run_filter(&sys, &traj.measurements).unwrap();
    let s = run_smoother(&f, &sys).unwrap();
    for k in (0..t).rev() {
        let (post, next) = (&f[k].posterior, &s.smoothed[k + 1]);
        assert_eq!(
            s.smoothed[k].num_generators(),
            post.num_generators() + next.num_generators() + 1
        );
        assert_eq!(
            s.smoothed[k].num_constraints(),
            post.num_constraints() + next.num_constraints() + 2
        );
    }
}

#[test]
fn smoothed_sets_lie_inside_posteriors() {
    let sys = presets::rotation_system();
    let traj = simulate_linear_trial(&sys, 10, 17, 0).unwrap();
    let f = run_filter(&sys, &traj.measurements).unwrap();
    let s = run_smoother_shared(&f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for k in 0..=10 {
        for _ in 0..20 {
            let (x, _) = sample_member(&s.smoothed[k], &mut rng).unwrap();
            assert!(f[k].posterior.contains_point(&x).unwrap(), "k {k}");
        }
    }
    assert_eq!(s.smoothed[10].interval_hull().unwrap(), f[10].posterior.interval_hull().unwrap());
}

fn random_w(rng: &mut ChaCha8Rng, m: usize, general: bool) -> ConstrainedZonotope {
    if general {
        let z = random_nonempty(rng, m, 3, 1);
        z.minkowski_sum(&ConstrainedZonotope::point(DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0))))
            .unwrap()
    } else {
        let g = DMatrix::from_fn(m, 2, |_, _| rng.random_range(-1.0..1.0));
        ConstrainedZonotope::zonotope(g, DVector::zeros(m)).unwrap()
    }
}

#[test]
fn step_matches_literal_blocks_for_centred_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let n = rng.random_range(1..4);
        let m = rng.random_range(1..3);
        let post = random_nonempty(&mut rng, n, n + 2, 1);
        let next = random_nonempty(&mut rng, n, n + 3, 2);
        let phi = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let gamma = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let w = random_w(&mut rng, m, false);
        let sys = LinearSystem::new(
            StepMatrices {
                phi: phi.clone(),
                gamma: gamma.clone(),
                xi: DMatrix::identity(n, n),
                psi: DMatrix::identity(n, n),
            },
            w.clone(),
            ConstrainedZonotope::point(DVector::zeros(n)),
            post.clone(),
        )
        .unwrap();
        let got = smooth_step(&post, &next, &sys, 0).unwrap();
        assert_eq!(got, literal_smooth_blocks(&post, &next, &phi, &gamma, &w, NoiseSign::AsWritten));
        assert_eq!(got, literal_smooth_blocks(&post, &next, &phi, &gamma, &w, NoiseSign::Reflected));
    }
}

#[test]
fn step_matches_reflected_blocks_for_general_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let n = rng.random_range(1..4);
        let post = random_nonempty(&mut rng, n, n + 2, 1);
        let next = random_nonempty(&mut rng, n, n + 2, 1);
        let phi = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let gamma = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let w = random_w(&mut rng, 2, true);
        let sys = LinearSystem::new(
            StepMatrices {
                phi: phi.clone(),
                gamma: gamma.clone(),
                xi: DMatrix::identity(n, n),
                psi: DMatrix::identity(n, n),
            },
            w.clone(),
            ConstrainedZonotope::point(DVector::zeros(n)),
            post.clone(),
        )
        .unwrap();
        let got = smooth_step(&post, &next, &sys, 0).unwrap();
        assert_eq!(got, literal_smooth_blocks(&post, &next, &phi, &gamma, &w, NoiseSign::Reflected));
    }
}

#[test]
fn unreflected_noise_blocks_lose_the_true_state() {
    // x⁺ = x + w with w ∈ [0.5, 1]; x = 0.9, w = 0.9 gives x⁺ = 1.8.
    let sys = scalar_walk(0.5, 1.0);
    let post = IntervalBox::cube(1, -1.0, 1.0).unwrap().to_zonotope();
    let next = ConstrainedZonotope::point(dv(&[1.8]));
    let one = DMatrix::identity(1, 1);

    let exact = smooth_step(&post, &next, &sys, 0).unwrap();
    assert!(exact.contains_point(&dv(&[0.9])).unwrap());
    let hull = exact.interval_hull().unwrap();
    assert!((hull.lower[0] - 0.8).abs() < 1e-9 && (hull.upper[0] - 1.0).abs() < 1e-9);

    let as_written = literal_smooth_blocks(&post, &next, &one, &one, &sys.w_range, NoiseSign::AsWritten);
    assert!(!as_written.contains_point(&dv(&[0.9])).unwrap());
    assert!(as_written.is_empty().unwrap());
}

#[test]
fn uninformative_future_keeps_the_posterior() {
    // Huge process noise: the future says nothing about the past.
    let sys = scalar_walk(-100.0, 100.0);
    let traj = simulate_linear_trial(&sys, 5, 3, 0).unwrap();
    let f = run_filter(&sys, &traj.measurements).unwrap();
    let s = run_smoother(&f, &sys).unwrap();
    for k in 0..=5 {
        let a = f[k].posterior.interval_hull().unwrap();
        let b = s.smoothed[k].interval_hull().unwrap();
        assert!((&a.lower - &b.lower).amax() < 1e-9 && (&a.upper - &b.upper).amax() < 1e-9);
    }
}

#[test]
fn noiseless_walk_smooths_to_the_final_interval() {
    // With w = 0 every state equals x_0, so all smoothed ranges coincide with
    // the intersection of all measurement intervals.
    let sys = scalar_walk(0.0, 0.0);
    let ys: Vec<DVector<f64>> = [0.3, -0.1, 0.2, 0.05].iter().map(|&y| dv(&[y])).collect();
    let f = run_filter(&sys, &ys).unwrap();
    let s = run_smoother_shared(&f).unwrap();
    for z in &s.smoothed {
        let h = z.interval_hull().unwrap();
        assert!((h.lower[0] - (-0.2)).abs() < 1e-9, "{h:?}");
        assert!((h.upper[0] - 0.4).abs() < 1e-9, "{h:?}");
    }
    let h0 = f[0].posterior.interval_hull().unwrap();
    assert!((h0.lower[0] + 0.2).abs() < 1e-9 && (h0.upper[0] - 0.8).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn smoothing_never_widens(seed in any::<u64>(), t in 1usize..12) {
        let sys = presets::rotation_system();
        let traj = simulate_linear_trial(&sys, t, seed, 0).unwrap();
        let f = run_filter(&sys, &traj.measurements).unwrap();
        let s = run_smoother_shared(&f).unwrap();
        let posts: Vec<_> = f.iter().map(|st| st.posterior.clone()).collect();
        let hf = ConstrainedZonotope::interval_hulls(&posts).unwrap();
        let hs = ConstrainedZonotope::interval_hulls(&s.smoothed).unwrap();
        for k in 0..=t {
            prop_assert!(hf[k].encloses(&hs[k], 1e-7));
            prop_assert!(hs[k].max_width() <= hf[k].max_width() + 1e-7);
        }
    }
}
