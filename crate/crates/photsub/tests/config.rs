mod common;

use photsub::error::RunError;
use photsub::ExperimentConfig;

#[test]
fn bundled_configs_validate() {
    for name in ["paper.config", "improved.config"] {
        let cfg = ExperimentConfig::load(&common::config_path(name)).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.taps.len(), 4, "{name}");
    }
}

#[test]
fn toml_round_trip_preserves_config_and_hash() {
    let cfg = common::paper();
    let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
}

#[test]
fn hash_ignores_notes_but_not_physics() {
    let cfg = common::paper();
    let mut noted = cfg.clone();
    noted.notes = "something else".into();
    assert_eq!(noted.hash(), cfg.hash());
    let mut other = cfg.clone();
    other.squeezing.squeezing_db += 0.1;
    assert_ne!(other.hash(), cfg.hash());
    assert_eq!(cfg.hash().len(), 64);
}

fn field_of(err: RunError) -> String {
    match err {
        RunError::Config { field, .. } => field,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn validation_names_the_offending_field() {
    let mut cfg = common::paper();
    cfg.duty = 1.5;
    assert_eq!(field_of(cfg.validate().unwrap_err()), "duty");

    let mut cfg = common::paper();
    cfg.taps[1].reflectance = 1.2;
    assert_eq!(field_of(cfg.validate().unwrap_err()), "taps[1]");

    let mut cfg = common::paper();
    cfg.taps[2].herald_n = 1;
    assert_eq!(field_of(cfg.validate().unwrap_err()), "taps[2].herald_n");

    let mut cfg = common::paper();
    cfg.plan.phases_deg = vec![0.0, 0.0];
    assert_eq!(field_of(cfg.validate().unwrap_err()), "plan");

    let mut cfg = common::paper();
    cfg.wigner.x_min = 7.0;
    assert_eq!(field_of(cfg.validate().unwrap_err()), "wigner");
}

#[test]
fn unknown_keys_are_rejected() {
    let text = common::paper().to_toml().replace("duty =", "dutty = 0.1\nduty =");
    assert!(ExperimentConfig::from_toml(&text).is_err());
}

#[test]
fn case_seeds_are_distinct() {
    use photsub::config::case_seed;
    let mut seen = std::collections::HashSet::new();
    for case in 0..8 {
        for purpose in 0..2 {
            assert!(seen.insert(case_seed(7, case, purpose)));
        }
    }
    assert_ne!(case_seed(7, 0, 0), case_seed(8, 0, 0));
}
