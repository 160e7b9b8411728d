use std::path::{Path, PathBuf};

use pdqkd::io::RunConfig;
use pdqkd_cli::{commands, Format};
use serde_json::Value;

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn load(rel: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(repo_file(rel)).unwrap()).unwrap()
}

fn assert_valid(schema: &str, text: &str) {
    let schema = load(&format!("docs/schemas/{schema}.schema.json"));
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let instance: Value = serde_json::from_str(text).unwrap();
    let errors: Vec<String> = validator.iter_errors(&instance).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{schema}: {errors:#?}");
}

fn config(name: &str) -> RunConfig {
    commands::load_config(&repo_file(&format!("docs/configs/{name}.json"))).unwrap()
}

#[test]
fn shipped_configs_match_config_schema() {
    for name in ["reference", "fiber"] {
        let text = std::fs::read_to_string(repo_file(&format!("docs/configs/{name}.json"))).unwrap();
        assert_valid("config", &text);
    }
    let text = std::fs::read_to_string(repo_file("docs/configs/reference_stats.json")).unwrap();
    assert_valid("statistics", &text);
}

#[test]
fn distribution_and_keyrate_reports_match_schemas() {
    let cfg = config("reference");
    assert_valid("distribution", &commands::distribution(&cfg, Format::Json).unwrap().text);
    let stats = std::fs::read_to_string(repo_file("docs/configs/reference_stats.json")).unwrap();
    assert_valid("keyrate", &commands::keyrate(&cfg, &stats).unwrap().text);
    let zero = commands::keyrate(&cfg, r#"{"q_c": 0, "e_c": 0, "q_nc": 0, "e_nc": 0}"#).unwrap();
    assert_valid("keyrate", &zero.text);
}

#[test]
fn simulation_and_ingest_documents_match_schemas() {
    let cfg = config("fiber");
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("run.csv");
    let sim = commands::simulate(&cfg, 20_000, 3, &records).unwrap();
    assert_valid("simulation", &sim.text);
    let ingested = commands::ingest(&records).unwrap();
    assert_valid("ingest", &ingested.text);
    assert_valid("statistics", &ingested.text);
}

#[test]
fn optimize_and_scan_documents_match_schemas() {
    let cfg = config("fiber");
    assert_valid("optimize", &commands::optimize_cmd(&cfg, Format::Json).unwrap().text);
    assert_valid("scan", &commands::scan(&cfg, Format::Json).unwrap().text);
}

#[test]
fn csv_tables_have_fixed_headers() {
    let cfg = config("fiber");
    let first = |t: String| t.lines().next().unwrap().to_string();
    assert_eq!(first(commands::distribution(&cfg, Format::Csv).unwrap().text), "n,p_click,p_noclick,p_total");
    assert_eq!(first(commands::optimize_cmd(&cfg, Format::Csv).unwrap().text), "level,mu1,mu2,t,rate,feasible");
    assert_eq!(first(commands::scan(&cfg, Format::Csv).unwrap().text), "length_km,rate");
}

#[test]
fn schemas_reject_unexpected_members() {
    let schema = load("docs/schemas/keyrate.schema.json");
    let validator = jsonschema::validator_for(&schema).unwrap();
    let cfg = config("reference");
    let stats = std::fs::read_to_string(repo_file("docs/configs/reference_stats.json")).unwrap();
    let mut doc: Value = serde_json::from_str(&commands::keyrate(&cfg, &stats).unwrap().text).unwrap();
    assert!(validator.is_valid(&doc));
    doc["result"]["r_total"] = Value::from(-1.0);
    assert!(!validator.is_valid(&doc));
    doc["result"]["r_total"] = Value::from(0.0);
    doc["extra"] = Value::from(1);
    assert!(!validator.is_valid(&doc));
}
