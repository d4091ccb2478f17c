//! Golden tests: the binary's output equals what the library produces directly.

use std::path::PathBuf;
use std::process::{Command, Output};

use cikit_core::api::{score_request, RewardItem, RewardMode, RewardRequest};
use cikit_core::cases::CaseStore;
use cikit_core::ppo::{train, PpoConfig};
use cikit_core::verifier::{parse_predictions, Verifier};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn fixture_str(name: &str) -> String {
    fixture(name).to_str().unwrap().to_string()
}

fn cikit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cikit"))
        .args(args)
        .env_remove("CIKIT_URL")
        .env_remove("CIKIT_BIND")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cikit(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn load(name: &str) -> CaseStore {
    CaseStore::ingest_json(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap().store
}

fn desk_request(mode: RewardMode) -> RewardRequest {
    let preds = parse_predictions(&std::fs::read_to_string(fixture("predictions.tsv")).unwrap()).unwrap();
    RewardRequest { items: preds.into_iter().map(|p| RewardItem::new(p.case_id, p.response)).collect(), mode }
}

#[test]
fn stats_matches_library() {
    let grid = fixture_str("grid_cases.json");
    let store = load("grid_cases.json");
    let text = ok(&["stats", "--cases", &grid]);
    assert_eq!(text, store.stats().render_text());
    assert!(text.contains("6,348"));
    assert_eq!(ok(&["stats", "--cases", &grid, "--format", "tsv"]), store.stats().render_tsv());
    let json: Value = serde_json::from_str(&ok(&["stats", "--cases", &grid, "--format", "json"])).unwrap();
    assert_eq!(json, store.stats().to_json());
}

#[test]
fn reward_matches_library() {
    let out = ok(&["reward", "--cases", &fixture_str("desk_cases.json"), "--pred", &fixture_str("predictions.tsv")]);
    let got: Value = serde_json::from_str(&out).unwrap();
    let want = score_request(&load("desk_cases.json"), &Verifier::default(), &desk_request(RewardMode::Lenient));
    assert_eq!(got, serde_json::to_value(&want).unwrap());
    assert_eq!(got["summary"]["mean_reward"], 0.75);
}

#[test]
fn reward_through_service_matches_local() {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let handle = rt
        .block_on(cikit_service::spawn(load("desk_cases.json"), Default::default(), "127.0.0.1:0"))
        .unwrap();
    let pred = fixture_str("predictions.tsv");
    let remote = ok(&["reward", "--url", &handle.base_url(), "--pred", &pred, "--mode", "strict"]);
    let local = ok(&["reward", "--cases", &fixture_str("desk_cases.json"), "--pred", &pred, "--mode", "strict"]);
    assert_eq!(remote, local);
    rt.block_on(handle.shutdown()).unwrap();
}

#[test]
fn ask_prints_worked_question() {
    let out = ok(&["ask", "--cases", &fixture_str("desk_cases.json"), "--id", "gdpr-realestate"]);
    assert_eq!(out, std::fs::read_to_string(fixture("realestate_question.txt")).unwrap() + "\n");
}

#[test]
fn split_matches_library() {
    let out = ok(&["split", "--cases", &fixture_str("grid_cases.json"), "--seed", "9", "--format", "tsv"]);
    assert_eq!(out, load("grid_cases.json").split(0.8, 9).unwrap().render_tsv());
}

#[test]
fn settings_supply_defaults_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let settings = dir.path().join("cikit.toml");
    std::fs::write(&settings, "seed = 9\nformat = \"tsv\"\n").unwrap();
    let s = settings.to_str().unwrap();
    let grid = fixture_str("grid_cases.json");
    let store = load("grid_cases.json");
    assert_eq!(ok(&["--settings", s, "split", "--cases", &grid]), store.split(0.8, 9).unwrap().render_tsv());
    assert_eq!(
        ok(&["--settings", s, "split", "--cases", &grid, "--seed", "3"]),
        store.split(0.8, 3).unwrap().render_tsv()
    );
    std::fs::write(&settings, "colour = \"red\"\n").unwrap();
    assert_eq!(cikit(&["--settings", s, "split", "--cases", &grid]).status.code(), Some(1));
}

#[test]
fn eval_accuracy() {
    let gold = fixture_str("eval_gold.tsv");
    let pred = fixture_str("eval_pred.tsv");
    let v: Value = serde_json::from_str(&ok(&["eval", "--metric", "acc", "--gold", &gold, "--pred", &pred])).unwrap();
    assert_eq!(v["value"], 0.8);
    assert_eq!(v["n"], 10);
}

#[test]
fn train_ppo_writes_library_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    let cases = fixture_str("desk_cases.json");
    ok(&["train-ppo", "--config", &fixture_str("ppo.toml"), "--cases", &cases, "--iterations", "5", "--out", out.to_str().unwrap()]);
    let cfg: PpoConfig = toml::from_str(&std::fs::read_to_string(fixture("ppo.toml")).unwrap()).unwrap();
    let report = train(&load("desk_cases.json"), &Verifier::default(), &PpoConfig { iterations: 5, ..cfg }).unwrap();
    assert_eq!(std::fs::read_to_string(out).unwrap(), report.curve_csv());
}

#[test]
fn regulation_export_is_canonical() {
    let gdpr = fixture_str("regulations/gdpr.json");
    assert_eq!(ok(&["ingest-regulations", "--law", "gdpr", "--file", &gdpr]), std::fs::read_to_string(&gdpr).unwrap());
}

#[test]
fn exit_codes() {
    let gold = fixture_str("eval_gold.tsv");
    assert_eq!(cikit(&["eval", "--metric", "acc", "--gold", &gold]).status.code(), Some(1));
    assert_eq!(cikit(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cikit(&["--help"]).status.code(), Some(0));
    assert_eq!(cikit(&["stats", "--cases", "/nonexistent/cases.json"]).status.code(), Some(2));
    assert_eq!(cikit(&["stats", "--cases", &gold]).status.code(), Some(2));
    assert_eq!(cikit(&["split", "--cases", &fixture_str("grid_cases.json"), "--ratio", "1.5"]).status.code(), Some(1));
    assert_eq!(cikit(&["stats", "--cases", &fixture_str("grid_cases.json"), "--format", "xml"]).status.code(), Some(1));
    let unknown = cikit(&["ask", "--cases", &fixture_str("desk_cases.json"), "--id", "nope"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("unknown case"));
}

#[test]
fn regulation_law_must_match_file() {
    let hipaa = fixture_str("regulations/hipaa.json");
    let out = cikit(&["ingest-regulations", "--law", "gdpr", "--file", &hipaa]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(cikit(&["ingest-regulations", "--law", "ccpa", "--file", &hipaa]).status.code(), Some(1));
    let both = ok(&["ingest-regulations", "--file", &fixture_str("regulations/gdpr.json"), "--input", &hipaa]);
    assert!(both.contains("\"HIPAA\"") && both.contains("\"GDPR\""));
}

#[test]
fn eval_metric_names() {
    let gold = fixture_str("eval_gold.tsv");
    let pred = fixture_str("eval_pred.tsv");
    let bacc = ok(&["eval", "--metric", "bacc", "--gold", &gold, "--pred", &pred]);
    assert_eq!(bacc, ok(&["eval", "--metric", "balanced-acc", "--gold", &gold, "--pred", &pred]));
    let f1: Value = serde_json::from_str(&ok(&["eval", "--metric", "f1", "--gold", &gold, "--pred", &pred])).unwrap();
    assert_eq!(f1["metric"], "macro_f1");
}
