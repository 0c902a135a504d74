use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use scale_picard::cli::exit_code;
use scale_picard::Error;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scale-picard"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn desk(name: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(configs().join(format!("{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn write_config(dir: &Path, v: &serde_json::Value) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn summary(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn dead_model_solve_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = desk("desk-epistatic");
    for r in ["h", "psi", "a"] {
        v["model"]["rates"][r]["values"] = 0.0.into();
    }
    let cfg = write_config(dir.path(), &v);
    let o = run(&["solve"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("trajectory.csv")).unwrap();
    let mut first = std::collections::HashMap::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let value: f64 = rec[3].parse().unwrap();
        let e = first.entry(rec[2].to_string()).or_insert(value);
        assert_eq!(*e, value);
    }
    let mut rdr = csv::Reader::from_path(dir.path().join("convergence.csv")).unwrap();
    let rec = rdr.records().next().unwrap().unwrap();
    assert_eq!(rec[1].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn slope_below_threshold_exits_4_with_both_values() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = desk("desk-epistatic");
    v["window"]["lambda"] = 10.0.into();
    let cfg = write_config(dir.path(), &v);
    let o = run(&["solve"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(4));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("lambda = 10") && err.contains("lambda0 = "), "{err}");
}

#[test]
fn invalid_config_exits_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = desk("desk-epistatic");
    v["model"]["rates"]["psi"]["values"] = (-0.1).into();
    let cfg = write_config(dir.path(), &v);
    let o = run(&["solve"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.rates.psi.values"));

    let mut v = desk("desk-epistatic");
    v["window"]["gamma"] = "half".into();
    let cfg = write_config(dir.path(), &v);
    let o = run(&["solve"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("window.gamma"));

    let mut v = desk("desk-epistatic");
    v["window"]["lambda"] = "fast".into();
    let cfg = write_config(dir.path(), &v);
    assert_eq!(run(&["solve"], &cfg, dir.path()).status.code(), Some(2));
}

#[test]
fn empty_family_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = desk("desk-epistatic");
    v["run"] = serde_json::json!({"family": {"kind": "h_scale", "members": []}});
    let cfg = write_config(dir.path(), &v);
    assert_eq!(run(&["stability"], &cfg, dir.path()).status.code(), Some(2));
}

#[test]
fn stability_run_writes_one_row_per_member() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["stability"], &configs().join("stability-h-scale.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv::Reader::from_path(dir.path().join("stability.csv")).unwrap().records().count();
    assert_eq!(rows, 10);
    let s = summary(dir.path());
    assert_eq!(s["decreasing_above_floor"], true);
    assert_eq!(s["reaches_floor"], true);
}

#[test]
fn identical_family_stays_within_twice_the_floor() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = desk("desk-poisson");
    v["run"] = serde_json::json!({"family": {"kind": "identical", "count": 3}});
    let cfg = write_config(dir.path(), &v);
    assert_eq!(run(&["stability"], &cfg, dir.path()).status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(dir.path().join("stability.csv")).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let (dev, floor): (f64, f64) = (rec[2].parse().unwrap(), rec[3].parse().unwrap());
        assert!(dev <= 2.0 * floor);
    }
}

#[test]
fn verify_desk_models_clean() {
    for name in ["desk-poisson", "desk-epistatic"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&["verify"], &configs().join(format!("{name}.json")), dir.path());
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(summary(dir.path())["failures"].as_array().unwrap().len(), 0);
    }
}

#[test]
fn halved_c2_exits_5_naming_b2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify"], &configs().join("verify-halved-c2.json"), dir.path());
    assert_eq!(o.status.code(), Some(5));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("B2"), "{err}");
    let s = summary(dir.path());
    let failures = s["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 1);
    assert!(failures[0].as_str().unwrap().starts_with("B2"));
}

#[test]
fn single_sample_verify_is_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = desk("desk-epistatic");
    v["run"]["samples"] = 1.into();
    let cfg = write_config(dir.path(), &v);
    assert_eq!(run(&["verify"], &cfg, dir.path()).status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(dir.path().join("verify.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["suite", "check", "samples", "worst_ratio", "worst_sample", "violations", "gating"]
    );
    let bounds: Vec<_> = rdr.records().map(|r| r.unwrap()).filter(|r| &r[0] == "bounds").collect();
    assert!(bounds.iter().all(|r| &r[2] == "1"));
}

#[test]
fn oracle_compare_agrees_on_desk_models() {
    for name in ["desk-poisson", "desk-epistatic"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&["oracle-compare"], &configs().join(format!("{name}.json")), dir.path());
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let s = summary(dir.path());
        assert_eq!(s["agree"], true);
        assert_eq!(s["poisson_skipped"].is_null(), name == "desk-poisson");
    }
}

#[test]
fn solve_outputs_are_byte_identical_across_runs_and_thread_counts() {
    let cfg = configs().join("desk-epistatic.json");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(&["solve"], &cfg, a.path()).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_scale-picard"))
        .args(["solve", "--threads", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(b.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    for f in ["trajectory.csv", "convergence.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn verify_report_is_deterministic() {
    let cfg = configs().join("desk-epistatic.json");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&["verify"], &cfg, a.path());
    run(&["verify"], &cfg, b.path());
    for f in ["verify.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn summary_embeds_hash_and_threshold_terms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("desk-epistatic.json");
    run(&["solve"], &cfg, dir.path());
    let s = summary(dir.path());
    use sha2::Digest;
    let expected = hex::encode(sha2::Sha256::digest(std::fs::read(&cfg).unwrap()));
    assert_eq!(s["config_sha256"], expected.as_str());
    let terms = s["lambda0"]["terms"].as_array().unwrap();
    assert_eq!(terms.len(), 4);
    let max = terms.iter().map(|t| t.as_f64().unwrap()).fold(f64::MIN, f64::max);
    assert_eq!(s["lambda0"]["value"].as_f64().unwrap(), max);
}

#[test]
fn convergence_ratios_respect_the_certificate() {
    let dir = tempfile::tempdir().unwrap();
    run(&["solve"], &configs().join("desk-epistatic.json"), dir.path());
    let rho = summary(dir.path())["rho"].as_f64().unwrap();
    let mut rdr = csv::Reader::from_path(dir.path().join("convergence.csv")).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        if let Ok(r) = rec[2].parse::<f64>() {
            assert!(r <= rho + 1e-9);
        }
    }
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = desk("desk-epistatic");
    v["run"]["samples"] = 2.into();
    v["run"]["seed"] = 9.into();
    let cfg = write_config(dir.path(), &v);
    run(&["verify"], &cfg, dir.path());
    assert_eq!(summary(dir.path())["seed"], 9);
    let o = Command::new(env!("CARGO_BIN_EXE_scale-picard"))
        .args(["verify", "--seed", "7", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(summary(dir.path())["seed"], 7);
    v["run"].as_object_mut().unwrap().remove("seed");
    let cfg = write_config(dir.path(), &v);
    run(&["verify"], &cfg, dir.path());
    assert_eq!(summary(dir.path())["seed"], 42);
}

#[test]
fn missing_config_file_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve"], &dir.path().join("nope.json"), dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn error_kinds_map_to_exit_codes() {
    assert_eq!(exit_code(&Error::ContractionViolation { iterate: 2, ratio: 0.9, bound: 0.5 }), 3);
    assert_eq!(
        exit_code(&Error::Admissibility { node: 1, t: 0.1, alpha: 1.0, distance: 2.0, radius: 1.0 }),
        3
    );
    assert_eq!(exit_code(&Error::Infeasible { lambda: 1.0, lambda0: 2.0 }), 4);
    assert_eq!(exit_code(&Error::Model("x".into())), 2);
}
