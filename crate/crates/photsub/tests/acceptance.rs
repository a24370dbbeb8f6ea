//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits 0 after printing so the workspace test run stays usable; set
//! `PHOTSUB_ACCEPTANCE_STRICT=1` to exit 1 when any hard criterion fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use photsub::pipeline::{fit_source, reconstruct_case, run_pipeline, sample_case, simulate_case, RunOptions};
use photsub::{ExperimentConfig, Mode, RunReport};
use photsub_core::fock::{apply_channel, CMatrix};
use photsub_core::homodyne::{normalize_dataset, sample_quadratures, MeasurementPlan};
use photsub_core::special::linspace;
use photsub_core::state_prep::loss_channel;
use photsub_core::subtraction::{herald, pnrd_povm, pnrd_povm_with_dark_counts, TapConfig};
use photsub_core::tomography::{mle_reconstruct, MleConfig, MONOTONE_SLACK};
use photsub_core::wigner::{parity_origin, wigner_eval, wigner_point};
use photsub_core::{Complex64, DensityMatrix, FockDim};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rayon::prelude::*;

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    /// Failure of a criterion that asks for an analysis rather than a hard stop.
    SoftFail,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { status: if ok { Status::Pass } else { Status::Fail }, detail }
}

fn within(v: f64, target: f64, tol: f64) -> bool {
    (v - target).abs() <= tol
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn simulate(cfg: &ExperimentConfig) -> (RunReport, Duration) {
    let (out, dt) = timed(|| run_pipeline(cfg, Mode::Simulate, &RunOptions::default()).expect("simulation runs"));
    (out.report, dt)
}

fn two_photon_minimum(r: &RunReport, dt: Duration) -> Outcome {
    let c = &r.cases.iter().find(|c| c.herald_n == 2).expect("herald 2").simulated;
    let [x, p] = c.w_min_location;
    let ok = within(c.w_min, -0.0030, 0.0008) && x.abs() <= 0.05 && within(p.abs(), 1.12, 0.05) && dt.as_secs_f64() < 60.0;
    outcome(
        ok,
        format!("w_min {:+.5} at ({x:+.3}, {p:+.3}); target -0.0030 +- 0.0008 at (0, +-1.12) +- 0.05; {:.1} s", c.w_min, dt.as_secs_f64()),
    )
}

fn one_photon_origin(r: &RunReport, dt: Duration) -> Outcome {
    let w = r.case(1).expect("herald 1").simulated.w_origin;
    outcome(
        within(w, -0.020, 0.008) && dt.as_secs_f64() < 60.0,
        format!("W(0,0) {w:+.5}; target -0.020 +- 0.008; {:.1} s", dt.as_secs_f64()),
    )
}

fn three_photon_origin(r: &RunReport) -> Outcome {
    let c = &r.case(3).expect("herald 3").simulated;
    outcome(
        within(c.w_origin, -0.0047, 0.002) && c.negative_regions == 1,
        format!("W(0,0) {:+.5}, {} negative regions; target -0.0047 +- 0.002 and 1 region", c.w_origin, c.negative_regions),
    )
}

fn narrowing(r: &RunReport) -> Outcome {
    let n = r.narrowing_for(2).expect("narrowing 2 vs 0");
    outcome(
        within(n.simulated_width, 0.21, 0.03),
        format!(
            "width narrowing {:.3} (variance {:.3}); target 0.21 +- 0.03",
            n.simulated_width, n.simulated_variance
        ),
    )
}

fn improved_projection() -> Outcome {
    let cfg = ExperimentConfig::load(&common::config_path("improved.config")).expect("improved.config loads");
    let (r, _) = simulate(&cfg);
    let w = r.case(1).expect("herald 1").simulated.w_origin;
    outcome(within(w, -0.110, 0.015), format!("improved W(0,0) {w:+.5}; target -0.110 +- 0.015"))
}

fn count_rates(r: &RunReport) -> Outcome {
    let targets = [(1, 3000.0), (2, 200.0), (3, 5.0)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, target) in targets {
        let rate = r.case(n).expect("herald case").rate_hz;
        let ratio = rate / target;
        ok &= (1.0 / 3.0..=3.0).contains(&ratio);
        parts.push(format!("n={n}: {rate:.3e}/s (x{ratio:.1})"));
    }
    Outcome {
        status: if ok { Status::Pass } else { Status::SoftFail },
        detail: format!("{}; target within x3 of 3000/200/5 per second", parts.join(", ")),
    }
}

const SEEDS: u64 = 20;

fn tomography_loop() -> Outcome {
    let (result, dt) = timed(|| {
        let mut cfg = common::paper();
        cfg.mle.bootstrap_resamples = 0;
        let source = fit_source(&cfg).expect("fit");
        let mut lines = Vec::new();
        let mut all_ok = true;
        for index in 0..cfg.taps.len() {
            let sim = simulate_case(&cfg, &source, index).expect("simulate");
            let truth = sim.negativity.w_origin;
            let hits: Vec<(bool, f64, f64)> = (0..SEEDS)
                .into_par_iter()
                .map(|k| {
                    let mut c = cfg.clone();
                    c.seed = cfg.seed.wrapping_add(1 + k);
                    let raw = sample_case(&c, &sim).expect("sample");
                    let rec = reconstruct_case(&c, &sim, raw).expect("reconstruct");
                    let dw = (rec.negativity.w_origin - truth).abs();
                    (rec.fidelity >= 0.98 && dw <= 0.006, rec.fidelity, dw)
                })
                .collect();
            let passed = hits.iter().filter(|h| h.0).count();
            let min_f = hits.iter().map(|h| h.1).fold(f64::INFINITY, f64::min);
            let max_dw = hits.iter().map(|h| h.2).fold(0.0, f64::max);
            all_ok &= passed as f64 >= 0.9 * SEEDS as f64;
            lines.push(format!("n={}: {passed}/{SEEDS} (min F {min_f:.4}, max |dW| {max_dw:.4})", sim.herald_n));
        }
        (all_ok, lines)
    });
    let (ok, lines) = result;
    outcome(
        ok && dt.as_secs_f64() < 600.0,
        format!("{}; need >= 90% with F >= 0.98 and |dW(0,0)| <= 0.006; {:.0} s", lines.join(", "), dt.as_secs_f64()),
    )
}

fn d(n: usize) -> FockDim {
    FockDim::new(n).unwrap()
}

fn random_state(n_max: usize) -> impl Strategy<Value = DensityMatrix> {
    let n = n_max + 1;
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
        let g = CMatrix::from_iterator(n, n, v.into_iter().map(|(re, im)| Complex64::new(re, im)));
        let m = &g * g.adjoint();
        let tr = m.trace().re.max(1e-12);
        DensityMatrix::new(d(n_max), m / Complex64::new(tr, 0.0)).unwrap()
    })
}

fn run_property<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let mut runner = TestRunner::new(ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn invariants() -> Outcome {
    let mut checks: Vec<(&str, Result<(), String>)> = Vec::new();

    checks.push((
        "povm completeness",
        run_property(64, (0.0f64..=1.0, 1usize..12), |(eta, n_max)| {
            let dim = d(n_max);
            let sum = (0..=n_max).fold(CMatrix::zeros(dim.size(), dim.size()), |acc, k| acc + pnrd_povm(k, eta, dim).unwrap());
            prop_assert!((sum - CMatrix::identity(dim.size(), dim.size())).camax() < 1e-8);
            let dark = pnrd_povm_with_dark_counts(0, eta, 0.0, dim).unwrap();
            prop_assert!((dark - pnrd_povm(0, eta, dim).unwrap()).camax() == 0.0);
            Ok(())
        }),
    ));

    checks.push((
        "channel composition",
        run_property(64, (0.0f64..=1.0, 0.0f64..=1.0, random_state(6)), |(e1, e2, rho)| {
            let dim = rho.dim();
            let two = apply_channel(&apply_channel(&rho, &loss_channel(e1, dim).unwrap()).unwrap(), &loss_channel(e2, dim).unwrap()).unwrap();
            let one = apply_channel(&rho, &loss_channel(e1 * e2, dim).unwrap()).unwrap();
            prop_assert!((two.elements() - one.elements()).camax() < 1e-10);
            Ok(())
        }),
    ));

    checks.push((
        "wigner normalization",
        run_property(16, random_state(5), |rho| {
            // n <= 5 Fock functions are negligible beyond |r| = 7.5
            let axis = linspace(-7.5, 7.5, 151);
            let integral = wigner_eval(&rho, &axis, &axis).integral();
            prop_assert!((integral - 1.0).abs() < 1e-3, "integral {}", integral);
            Ok(())
        }),
    ));

    checks.push((
        "parity cross-check",
        run_property(64, random_state(12), |rho| {
            prop_assert!((wigner_point(&rho, 0.0, 0.0) - parity_origin(&rho)).abs() < 1e-9);
            Ok(())
        }),
    ));

    checks.push((
        "RrhoR monotonicity",
        run_property(8, (random_state(4), any::<u64>()), |(rho, seed)| {
            let plan = MeasurementPlan::new(linspace(0.0, std::f64::consts::PI, 6)[..5].to_vec(), 300, 2000, seed).unwrap();
            let ds = normalize_dataset(&sample_quadratures(&rho, &plan).unwrap()).unwrap();
            let cfg = MleConfig { dim: d(5), max_iters: 300, ..MleConfig::default() };
            let rec = mle_reconstruct(&ds, &cfg).unwrap();
            for w in rec.log_likelihood_trace.windows(2) {
                prop_assert!(w[1] >= w[0] - MONOTONE_SLACK * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
            }
            Ok(())
        }),
    ));

    checks.push(("dataset round trip", dataset_round_trip()));
    checks.push(("seeded reproducibility", seeded_reproducibility()));

    let failed: Vec<String> = checks.iter().filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}"))).collect();
    let names: Vec<&str> = checks.iter().map(|(n, _)| *n).collect();
    if failed.is_empty() {
        outcome(true, format!("{} green", names.join(", ")))
    } else {
        outcome(false, failed.join("; "))
    }
}

fn dataset_round_trip() -> Result<(), String> {
    let cfg = common::small();
    let source = fit_source(&cfg).map_err(|e| e.to_string())?;
    let sim = simulate_case(&cfg, &source, 2).map_err(|e| e.to_string())?;
    let ds = sample_case(&cfg, &sim).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    photsub::io::write_dataset(dir.path(), &ds, Some(&cfg.plan_for(2).map_err(|e| e.to_string())?)).map_err(|e| e.to_string())?;
    let back = photsub::io::read_dataset(dir.path()).map_err(|e| e.to_string())?;
    let same_bits = back.frames.len() == ds.frames.len()
        && back.frames.iter().zip(&ds.frames).all(|(a, b)| a.phase_index == b.phase_index && a.value.to_bits() == b.value.to_bits())
        && back.shot_frames.iter().map(|v| v.to_bits()).eq(ds.shot_frames.iter().map(|v| v.to_bits()))
        && back.phases.iter().map(|v| v.to_bits()).eq(ds.phases.iter().map(|v| v.to_bits()));
    if same_bits && back == ds {
        Ok(())
    } else {
        Err("dataset changed on disk".into())
    }
}

fn seeded_reproducibility() -> Result<(), String> {
    let cfg = common::small();
    let opts = RunOptions { cases: Some(vec![1, 2]), out: None };
    let run_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
        pool.install(|| run_pipeline(&cfg, Mode::Full, &opts).map(|o| o.report.to_json()))
    };
    let a = run_with(1).map_err(|e| e.to_string())?;
    let b = run_with(1).map_err(|e| e.to_string())?;
    let c = run_with(3).map_err(|e| e.to_string())?;
    match (a == b, a == c) {
        (true, true) => Ok(()),
        (false, _) => Err("repeat run differs".into()),
        (_, false) => Err("report depends on thread count".into()),
    }
}

/// Fock-space term map: (signal photons, idler photons) -> amplitude.
type Terms = BTreeMap<(usize, usize), f64>;

/// Output of the tap for input `|n>|0>`, expanding
/// `(sqrt(R) a_s^dag - sqrt(1-R) a_i^dag)^n |0,0> / sqrt(n!)` one creation
/// operator at a time.
fn expand_fock(n: usize, reflectance: f64) -> Terms {
    let (sr, st) = (reflectance.sqrt(), (1.0 - reflectance).sqrt());
    let mut terms = Terms::from([((0, 0), 1.0)]);
    for _ in 0..n {
        let mut next = Terms::new();
        for (&(s, i), &c) in &terms {
            *next.entry((s + 1, i)).or_insert(0.0) += c * sr * ((s + 1) as f64).sqrt();
            *next.entry((s, i + 1)).or_insert(0.0) -= c * st * ((i + 1) as f64).sqrt();
        }
        terms = next;
    }
    let norm = (1..=n).map(|k| k as f64).product::<f64>().sqrt();
    terms.values_mut().for_each(|c| *c /= norm);
    terms
}

fn choose(n: usize, k: usize) -> f64 {
    (0..k).map(|j| (n - j) as f64 / (j + 1) as f64).product()
}

/// Brute-force heralded state: `sum_nm rho_nm |psi_n><psi_m|`, weighted by
/// the detector's click probability per idler photon number, idler traced out.
fn brute_force_herald(rho: &DensityMatrix, reflectance: f64, herald_n: usize, eta: f64) -> (CMatrix, f64) {
    let size = rho.dim().size();
    let kets: Vec<Terms> = (0..size).map(|n| expand_fock(n, reflectance)).collect();
    let click = |k: usize| if k < herald_n { 0.0 } else { choose(k, herald_n) * eta.powi(herald_n as i32) * (1.0 - eta).powi((k - herald_n) as i32) };
    let mut out = CMatrix::zeros(size, size);
    for n in 0..size {
        for m in 0..size {
            let rnm = rho.elements()[(n, m)];
            for (&(a, k), &cn) in &kets[n] {
                for (&(b, l), &cm) in &kets[m] {
                    if k == l {
                        out[(a, b)] += rnm * (cn * cm * click(k));
                    }
                }
            }
        }
    }
    let p = out.trace().re;
    (out / Complex64::new(p, 0.0), p)
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut runner = TestRunner::deterministic();
    for n_max in 1..=4 {
        for _ in 0..3 {
            let rho = random_state(n_max).new_tree(&mut runner).expect("state").current();
            for &r in &[0.97, 0.7, 0.5] {
                for herald_n in 0..=n_max.min(3) {
                    for &eta in &[1.0, 0.6] {
                        let tap = TapConfig::new(r, herald_n, eta).unwrap();
                        let h = match herald(&rho, &tap, 1.0, 1.0) {
                            Ok(h) => h,
                            Err(_) => continue,
                        };
                        let (state, p) = brute_force_herald(&rho, r, herald_n, eta);
                        worst = worst.max((h.state.elements() - state).camax()).max((h.probability - p).abs());
                        count += 1;
                    }
                }
            }
        }
    }
    outcome(worst <= 1e-9 && count > 0, format!("{count} heralded states, n_max <= 4, max deviation {worst:.2e}; tolerance 1e-9"))
}

type Check<'a> = Box<dyn FnOnce() -> Outcome + 'a>;

fn main() {
    let paper = common::paper();
    let (report, dt) = simulate(&paper);
    let criteria: Vec<(&str, Check)> = vec![
        ("two-photon Wigner minimum", Box::new(|| two_photon_minimum(&report, dt))),
        ("one-photon W(0,0)", Box::new(|| one_photon_origin(&report, dt))),
        ("three-photon W(0,0) and single region", Box::new(|| three_photon_origin(&report))),
        ("sub-Planck narrowing", Box::new(|| narrowing(&report))),
        ("improvement projection", Box::new(improved_projection)),
        ("count-rate order of magnitude (soft)", Box::new(|| count_rates(&report))),
        ("tomography loop fidelity", Box::new(tomography_loop)),
        ("invariant suite", Box::new(invariants)),
        ("oracle equivalence", Box::new(oracle_equivalence)),
    ];
    let mut hard_failures = 0;
    let total = criteria.len();
    let mut passed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let o = check();
        let tag = match o.status {
            Status::Pass => {
                passed += 1;
                "PASS"
            }
            Status::Fail => {
                hard_failures += 1;
                "FAIL"
            }
            Status::SoftFail => "SOFT-FAIL",
        };
        println!("criterion {} {tag}: {name}: {}", i + 1, o.detail);
    }
    println!("acceptance: {passed}/{total} passed, {hard_failures} hard failures");
    if hard_failures > 0 && std::env::var_os("PHOTSUB_ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
