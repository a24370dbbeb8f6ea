mod common;

use std::process::Command;

fn photsub() -> Command {
    Command::new(env!("CARGO_BIN_EXE_photsub"))
}

#[test]
fn validate_config_prints_the_hash() {
    let path = common::config_path("paper.config");
    let out = photsub().args(["validate-config", "--config"]).arg(&path).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.trim(), format!("ok {}", common::paper().hash()));
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let mut cfg = common::paper();
    cfg.duty = 0.0;
    std::fs::write(&path, cfg.to_toml()).unwrap();
    let out = photsub().args(["validate-config", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duty"));
}

#[test]
fn numerical_failure_exits_with_3() {
    // Idler cutoff too small for a bright source: truncation leakage.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("leaky.toml");
    let mut cfg = common::small();
    cfg.truncation.idler_n_max = Some(3);
    cfg.taps.iter_mut().for_each(|t| t.reflectance = 0.5);
    std::fs::write(&path, cfg.to_toml()).unwrap();
    let out = photsub().args(["simulate", "--cases", "0", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sample_then_reconstruct_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("small.toml");
    std::fs::write(&cfg_path, common::small().to_toml()).unwrap();
    let data = dir.path().join("data");
    let s = photsub().args(["sample", "--cases", "1", "--config"]).arg(&cfg_path).arg("--out").arg(&data).status().unwrap();
    assert!(s.success());
    let rec = dir.path().join("rec");
    let s = photsub()
        .args(["reconstruct", "--herald", "1", "--config"])
        .arg(&cfg_path)
        .arg("--data")
        .arg(data.join("case_1").join("data"))
        .arg("--out")
        .arg(&rec)
        .status()
        .unwrap();
    assert!(s.success());
    assert!(rec.join("reconstruction.json").exists());

    let run = |name: &str| {
        let out = dir.path().join(name);
        let s = photsub().args(["pipeline", "--mode", "simulate", "--config"]).arg(&cfg_path).arg("--out").arg(&out).status().unwrap();
        assert!(s.success());
        out.join("report.json")
    };
    let (a, b) = (run("a"), run("b"));
    let out = photsub().arg("compare").arg(&a).arg(&b).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 5);
}
