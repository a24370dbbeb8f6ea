mod common;

use photsub::pipeline::{run_pipeline, RunOptions};
use photsub::report::format_deltas;
use photsub::{compare_reports, Mode, RunReport};
use std::f64::consts::PI;

#[test]
fn lossy_squeezed_vacuum_matches_gaussian_origin_value() {
    // Unit tap reflectance and herald 0: the kept state is the lossy squeezed
    // source itself, whose Gaussian Wigner function peaks at 1/(2 pi sqrt(Vx Vp)).
    let mut cfg = common::small();
    cfg.truncation.signal_n_max = 30;
    cfg.taps.truncate(1);
    cfg.taps[0].reflectance = 1.0;
    let out = run_pipeline(&cfg, Mode::Simulate, &RunOptions::default()).unwrap();
    let fit = &out.report.fit;
    let eta = fit.budget_efficiency;
    let vs = 0.5 * (eta * (-2.0 * fit.r).exp() + 1.0 - eta);
    let va = 0.5 * (eta * (2.0 * fit.r).exp() + 1.0 - eta);
    let expect = 1.0 / (2.0 * PI * (vs * va).sqrt());
    let case = &out.report.cases[0];
    assert!((case.probability - 1.0).abs() < 1e-12);
    assert!((case.simulated.w_origin - expect).abs() < 1e-7, "{} vs {expect}", case.simulated.w_origin);
}

#[test]
fn reports_are_deterministic_and_self_compare_to_zero() {
    let cfg = common::small();
    let opts = RunOptions { cases: Some(vec![0, 2]), out: None };
    let a = run_pipeline(&cfg, Mode::Full, &opts).unwrap().report;
    let b = run_pipeline(&cfg, Mode::Full, &opts).unwrap().report;
    assert_eq!(a.to_json(), b.to_json());
    let back: RunReport = serde_json::from_str(&a.to_json()).unwrap();
    assert_eq!(back, a);
    for d in compare_reports(&a, &b).unwrap() {
        assert_eq!((d.w_origin, d.w_min, d.rate_hz), (0.0, 0.0, 0.0));
    }
    assert!(format_deltas(&compare_reports(&a, &b).unwrap()).lines().count() == 3);
}

#[test]
fn case_results_do_not_depend_on_selection() {
    let cfg = common::small();
    let all = run_pipeline(&cfg, Mode::Full, &RunOptions::default()).unwrap().report;
    let one = run_pipeline(&cfg, Mode::Full, &RunOptions { cases: Some(vec![2]), out: None }).unwrap().report;
    assert_eq!(all.case(2), one.case(2));
}

#[test]
fn seed_changes_only_sampled_quantities() {
    let cfg = common::small();
    let mut other = cfg.clone();
    other.seed += 1;
    let opts = RunOptions { cases: Some(vec![1]), out: None };
    let a = run_pipeline(&cfg, Mode::Full, &opts).unwrap().report;
    let b = run_pipeline(&other, Mode::Full, &opts).unwrap().report;
    assert_eq!(a.cases[0].simulated, b.cases[0].simulated);
    assert_ne!(a.cases[0].reconstructed, b.cases[0].reconstructed);
}

#[test]
fn comparing_different_case_sets_fails() {
    let cfg = common::small();
    let a = run_pipeline(&cfg, Mode::Simulate, &RunOptions { cases: Some(vec![0, 1]), out: None }).unwrap().report;
    let b = run_pipeline(&cfg, Mode::Simulate, &RunOptions { cases: Some(vec![0, 2]), out: None }).unwrap().report;
    assert!(compare_reports(&a, &b).is_err());
}

#[test]
fn unknown_case_is_a_config_error() {
    let cfg = common::small();
    let err = run_pipeline(&cfg, Mode::Simulate, &RunOptions { cases: Some(vec![9]), out: None }).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn artifacts_are_written() {
    let cfg = common::small();
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions { cases: Some(vec![1]), out: Some(dir.path().to_path_buf()) };
    let out = run_pipeline(&cfg, Mode::Full, &opts).unwrap();
    for f in ["report.json", "run_info.json", "summary.txt", "config.toml", "case_1/wigner_sim.csv", "case_1/wigner_rec.json", "case_1/data/dataset.csv", "case_1/histogram.csv", "case_1/reconstruction.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert_eq!(text, out.report.to_json());
}
