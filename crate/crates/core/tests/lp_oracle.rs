mod common;

use common::{brute_force_min, random_lp, RandomLp};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zonosmooth::lp::{is_feasible, solve_lp, LpProblem, LpResult, LpSession, Sense};

fn problem(r: &RandomLp, sense: Sense, negate: bool) -> LpProblem {
    let c = if negate { -&r.c } else { r.c.clone() };
    LpProblem::new(
        c,
        r.a.clone(),
        r.b.clone(),
        DVector::from_column_slice(&r.lower),
        DVector::from_column_slice(&r.upper),
        sense,
    )
    .unwrap()
}

#[test]
fn random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut feasible, mut infeasible) = (0, 0);
    for _ in 0..300 {
        let r = random_lp(&mut rng, 6, 3);
        let oracle = brute_force_min(&r.c, &r.a, &r.b, &r.lower, &r.upper);
        let p = problem(&r, Sense::Minimize, false);
        let got = solve_lp(&p).unwrap();
        assert_eq!(is_feasible(&p).unwrap(), oracle.is_some());
        match (oracle, got) {
            (Some(v), LpResult::Optimal { value, point }) => {
                feasible += 1;
                assert!((v - value).abs() <= 1e-8, "oracle {v} vs simplex {value}");
                assert!((&r.a * &point - &r.b).amax() <= 1e-9);
            }
            (None, LpResult::Infeasible) => infeasible += 1,
            (o, g) => panic!("oracle {o:?} vs simplex {g:?}"),
        }
    }
    assert!(feasible > 50 && infeasible > 20, "{feasible}/{infeasible}");
}

#[test]
fn maximize_equals_negated_minimize() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let r = random_lp(&mut rng, 6, 3);
        let max = solve_lp(&problem(&r, Sense::Maximize, false)).unwrap();
        let min = solve_lp(&problem(&r, Sense::Minimize, true)).unwrap();
        match (max.value(), min.value()) {
            (Some(a), Some(b)) => assert!((a + b).abs() <= 1e-8),
            (None, None) => {}
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn solver_is_bitwise_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let p = problem(&random_lp(&mut rng, 6, 3), Sense::Minimize, false);
        assert_eq!(solve_lp(&p).unwrap(), solve_lp(&p).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn warm_started_session_matches_fresh_solves(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = random_lp(&mut rng, 6, 3);
        let p = problem(&r, Sense::Minimize, false);
        let mut session = LpSession::new(&p).unwrap();
        prop_assert_eq!(session.is_feasible(), is_feasible(&p).unwrap());
        for round in 0..6 {
            let c = DVector::from_fn(r.c.len(), |j, _| ((seed as usize + 7 * round + 3 * j) % 11) as f64 - 5.0);
            let sense = if round % 2 == 0 { Sense::Minimize } else { Sense::Maximize };
            let mut fresh = p.clone();
            fresh.objective = c.clone();
            fresh.sense = sense;
            match (session.solve(&c, sense).unwrap().value(), solve_lp(&fresh).unwrap().value()) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-8, "{} vs {}", a, b),
                (None, None) => {}
                other => prop_assert!(false, "{:?}", other),
            }
        }
    }

    #[test]
    fn optimum_never_beaten_by_feasible_samples(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = random_lp(&mut rng, 5, 2);
        if let LpResult::Optimal { value, .. } = solve_lp(&problem(&r, Sense::Minimize, false)).unwrap() {
            for x in common::enumerate_vertices(&r.a, &r.b, &r.lower, &r.upper) {
                prop_assert!(r.c.dot(&x) >= value - 1e-8);
            }
        }
    }
}
