use scale_picard::config::ExperimentConfig;
use scale_picard::kimura::Slope;
use scale_picard::Error;

fn base() -> serde_json::Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/desk-epistatic.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn parse(v: &serde_json::Value) -> scale_picard::Result<ExperimentConfig> {
    ExperimentConfig::from_json(&v.to_string())
}

fn config_path(v: &serde_json::Value) -> String {
    match parse(v) {
        Err(Error::Config { path, .. }) => path,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn lambda_spec_variants() {
    let mut v = base();
    assert_eq!(parse(&v).unwrap().slope().unwrap(), Slope::Auto(2.0));
    v["window"]["lambda"] = serde_json::json!({ "auto": 3.0 });
    assert_eq!(parse(&v).unwrap().slope().unwrap(), Slope::Auto(3.0));
    v["window"]["lambda"] = serde_json::json!(7.5);
    assert_eq!(parse(&v).unwrap().slope().unwrap(), Slope::Fixed(7.5));
    v["window"].as_object_mut().unwrap().remove("lambda");
    assert_eq!(parse(&v).unwrap().slope().unwrap(), Slope::Auto(2.0));
}

#[test]
fn bad_lambda_specs_name_the_field() {
    let mut v = base();
    v["window"]["lambda"] = serde_json::json!("fast");
    assert_eq!(config_path(&v), "window.lambda");
    v["window"]["lambda"] = serde_json::json!(-1.0);
    assert_eq!(config_path(&v), "window.lambda");
    v["window"]["lambda"] = serde_json::json!({ "auto": 1.0 });
    assert_eq!(config_path(&v), "window.lambda.auto");
}

#[test]
fn per_site_values_must_match_the_site_count() {
    let mut v = base();
    v["initial"]["density"] = serde_json::json!([0.1, 0.2, 0.3, 0.4]);
    assert_eq!(parse(&v).unwrap().initial_density().unwrap(), vec![0.1, 0.2, 0.3, 0.4]);
    v["initial"]["density"] = serde_json::json!([0.1, 0.2]);
    assert!(config_path(&v).starts_with("initial.density"));
}

#[test]
fn unknown_fields_and_types_are_reported_with_paths() {
    let mut v = base();
    v["window"]["gama"] = serde_json::json!(0.5);
    assert!(config_path(&v).starts_with("window"));
    let mut v = base();
    v["model"]["n_max"] = serde_json::json!("four");
    assert_eq!(config_path(&v), "model.n_max");
}

#[test]
fn nonpositive_radius_is_rejected() {
    let mut v = base();
    v["window"]["radius"] = serde_json::json!(0.0);
    assert_eq!(config_path(&v), "window.radius");
}

#[test]
fn seed_falls_back_to_default() {
    let mut v = base();
    v["run"].as_object_mut().unwrap().remove("seed");
    let cfg = parse(&v).unwrap();
    assert_eq!(cfg.seed(None), 42);
    assert_eq!(cfg.seed(Some(9)), 9);
}

#[test]
fn certificate_override_scales_c2() {
    let plain = parse(&base()).unwrap().setup().unwrap().0.problem.constants;
    let mut v = base();
    v["run"]["certificate"] = serde_json::json!({ "c2_scale": 0.5 });
    let scaled = parse(&v).unwrap().setup().unwrap().0.problem.constants;
    assert_eq!(scaled.c2, 0.5 * plain.c2);
    assert_eq!(scaled.c3, plain.c3);
}
