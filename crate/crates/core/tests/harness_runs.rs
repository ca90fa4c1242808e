use std::fs;

use nalgebra::DVector;
use zonosmooth::cz::ConstrainedZonotope;
use zonosmooth::demos::{example_from_file, example_linear, example_scalar, DemoError};
use zonosmooth::harness::{
    mse_series, point_estimate, run_experiment, run_trials, simulate, ExperimentConfig,
    HarnessError, SystemSpec, Task,
};
use zonosmooth::model::presets;
use zonosmooth::smf::run_filter;
use zonosmooth::CSV_HEADER;

fn small(system: SystemSpec, horizon: usize, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        system,
        horizon,
        trials,
        hull_window: [0, horizon],
        ..ExperimentConfig::default()
    }
}

#[test]
fn runs_are_reproducible_to_the_byte() {
    let cfg = small(SystemSpec::Rotation, 8, 6);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sa = run_experiment(&cfg, Task::Smooth, a.path()).unwrap();
    let sb = run_experiment(&cfg, Task::Smooth, b.path()).unwrap();
    assert_eq!(sa.record, sb.record);
    assert_eq!(sa.aggregates, sb.aggregates);
    for f in &sa.files {
        let name = f.file_name().unwrap();
        let text = fs::read_to_string(f).unwrap();
        assert!(text.starts_with(CSV_HEADER), "{name:?}");
        assert_eq!(text, fs::read_to_string(b.path().join(name)).unwrap());
    }
}

#[test]
fn aggregates_are_the_trial_means() {
    let cfg = small(SystemSpec::Rotation, 6, 5);
    let rec = run_trials(&cfg, None).unwrap();
    let aggs = rec.aggregates();
    assert_eq!(aggs.len(), 7);

    // Recompute from scratch, through the filter and the MSE helper.
    let sys = cfg.system.build().unwrap();
    let mut estimates = Vec::new();
    let mut truths = Vec::new();
    let mut diam_sum = [0.0; 7];
    for t in 0..5 {
        let traj = simulate(&sys, 6, cfg.seed, t).unwrap();
        let zonosmooth::harness::System::Linear(ls) = &sys else { unreachable!() };
        let f = run_filter(ls, &traj.measurements).unwrap();
        let mut est = Vec::new();
        for (k, st) in f.iter().enumerate() {
            diam_sum[k] += st.posterior.diameter_inf().unwrap();
            est.push(point_estimate(&st.posterior).unwrap());
        }
        assert_eq!(rec.trials[t as usize].steps[0].state, traj.states[0]);
        estimates.push(est);
        truths.push(traj.states);
    }
    let (per_k, overall) = mse_series(&estimates, &truths).unwrap();
    for k in 0..7 {
        assert!((aggs[k].filtered_diameter - diam_sum[k] / 5.0).abs() < 1e-9);
        assert!((aggs[k].mse_filtered_center - per_k[k]).abs() < 1e-9);
    }
    let mean: f64 = aggs.iter().map(|a| a.mse_filtered_center).sum::<f64>() / 7.0;
    assert!((mean - overall).abs() < 1e-9);
}

#[test]
fn point_estimate_is_the_support_midpoint() {
    let sys = presets::rotation_system();
    let traj = zonosmooth::model::simulate_linear(&sys, 4, 9).unwrap();
    let f = run_filter(&sys, &traj.measurements).unwrap();
    for st in &f {
        let z: &ConstrainedZonotope = &st.posterior;
        let est = point_estimate(z).unwrap();
        for i in 0..2 {
            let e = DVector::from_fn(2, |j, _| if i == j { 1.0 } else { 0.0 });
            let mid = 0.5 * (z.support_value(&e).unwrap() - z.support_value(&-&e).unwrap());
            assert!((est[i] - mid).abs() < 1e-9);
        }
    }
}

#[test]
fn mse_series_checks_lengths() {
    let one = vec![vec![DVector::from_element(1, 1.0)]];
    let two = vec![vec![DVector::from_element(1, 1.0); 2]];
    assert!(matches!(mse_series(&one, &two), Err(HarnessError::Length(_))));
    assert!(matches!(mse_series(&[], &[]), Err(HarnessError::Length(_))));
    let (per_k, overall) = mse_series(&one, &[vec![DVector::from_element(1, 3.0)]]).unwrap();
    assert_eq!((per_k, overall), (vec![4.0], 4.0));
}

#[test]
fn filter_task_skips_the_mse_file() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_experiment(&small(SystemSpec::CubeRoot, 5, 3), Task::Filter, dir.path()).unwrap();
    assert_eq!(s.files.len(), 2);
    assert!(!dir.path().join("mse.csv").exists());
}

#[test]
fn baseline_needs_a_linear_system() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_experiment(&small(SystemSpec::CubeRoot, 5, 3), Task::CompareRts, dir.path()).unwrap_err();
    assert!(matches!(err, HarnessError::Unsupported(_)), "{err}");
}

#[test]
fn demos_run_on_a_single_short_trial() {
    let dir = tempfile::tempdir().unwrap();
    let lin = example_linear(&small(SystemSpec::Rotation, 1, 1), dir.path()).unwrap();
    assert_eq!(lin.aggregates.len(), 2);
    assert!(lin.aggregates[1].smoothed_diameter == lin.aggregates[1].filtered_diameter);
    let sc = example_scalar(&small(SystemSpec::CubeRoot, 1, 1), dir.path()).unwrap();
    assert_eq!(sc.aggregates.len(), 2);
    assert!(matches!(
        example_scalar(&small(SystemSpec::Rotation, 1, 1), dir.path()),
        Err(DemoError::WrongSystem { .. })
    ));
}

#[test]
fn demo_reports_corrupted_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, "{\"horizon\": 5,\n \"system\": {\"kind\": \"rotaton\"}}").unwrap();
    let err = example_from_file(&path, Some(dir.path())).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("rotaton") && msg.contains("line 2"), "{msg}");

    let out = dir.path().join("out");
    fs::write(&path, "{\"horizon\": 3, \"trials\": 2, \"hull_window\": [0, 3]}").unwrap();
    let s = example_from_file(&path, Some(&out)).unwrap();
    assert_eq!(s.record.trials.len(), 2);
    assert!(out.join("diameters.csv").exists());
}

#[test]
fn shipped_configs_parse() {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    for name in ["linear.json", "scalar.json", "rts.json"] {
        let path = std::path::Path::new(root).join(name);
        ExperimentConfig::from_file(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
