use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use slowsql::corpus::read_corpus;
use slowsql::fixtures;
use slowsql_cli::commands::RepairPair;

const BIN: &str = env!("CARGO_BIN_EXE_slowsql");

fn seeds_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/seeds.sql")
}

fn slowsql(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("DATABASE_URL")
        .env_remove("MODEL_ENDPOINT")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn generate(out: &Path, iterations: &str, extra: &[&str]) -> Output {
    let mut args = vec!["generate", "--seeds", path(&seeds_file()).to_owned().leak(), "--simulate", "--out", path(out), "--iterations", iterations, "--seed", "3"];
    args.extend_from_slice(extra);
    slowsql(&args)
}

#[test]
fn generate_writes_a_thresholded_corpus_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let o = generate(&a, "40", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("seed ")).count(), 5);
    let (h, recs) = read_corpus(&mut std::io::BufReader::new(std::fs::File::open(&a).unwrap())).unwrap();
    assert_eq!(h.schema_id, fixtures::SCHEMA_ID);
    assert!(!recs.is_empty());
    assert!(recs.iter().all(|r| r.slowdown_ratio >= 2.0));
    assert!(generate(&b, "40", &[]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn resumed_checkpoints_match_a_fresh_run() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("ck");
    let (fresh, resumed) = (dir.path().join("fresh.jsonl"), dir.path().join("resumed.jsonl"));
    assert!(generate(&fresh, "30", &[]).status.success());
    assert!(generate(&resumed, "15", &["--checkpoint-dir", path(&ck)]).status.success());
    assert_eq!(std::fs::read_dir(&ck).unwrap().count(), 5);
    let o = generate(&resumed, "30", &["--checkpoint-dir", path(&ck)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&fresh).unwrap(), std::fs::read(&resumed).unwrap());
}

#[test]
fn empty_seed_file_is_zero_yield() {
    let dir = tempfile::tempdir().unwrap();
    let seeds = dir.path().join("seeds.sql");
    std::fs::write(&seeds, "-- nothing here\n").unwrap();
    let o = slowsql(&["generate", "--seeds", path(&seeds), "--simulate", "--out", path(&dir.path().join("c.jsonl"))]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn sft_export_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let (c, s) = (dir.path().join("c.jsonl"), dir.path().join("sft.jsonl"));
    assert!(generate(&c, "10", &["--sft", path(&s)]).status.success());
    let text = std::fs::read_to_string(&s).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert!(first["plan"].as_str().unwrap().starts_with("Result"));
    assert!(first["schema"].as_str().unwrap().contains("CREATE TABLE"));
}

#[test]
fn config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.jsonl");
    let o = slowsql(&["generate", "--seeds", path(&seeds_file()), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[mcts]\niterations = 5\n\n[mcts_typo]\nx = 1\n").unwrap();
    let o = slowsql(&["--config", path(&cfg), "generate", "--seeds", path(&seeds_file()), "--simulate", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mcts_typo"));
    std::fs::write(&cfg, "[reward]\nrho_fmt = -1.0\nrho_sem = -2.0\n").unwrap();
    let o = slowsql(&["--config", path(&cfg), "stats", "--corpus", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[gate]\nmin_joins = 9\n").unwrap();
    let out = dir.path().join("c.jsonl");
    let o = slowsql(&["--config", path(&cfg), "generate", "--seeds", path(&seeds_file()), "--simulate", "--out", path(&out), "--iterations", "5"]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stdout(&o).matches("rejected (complexity)").count(), 5);
}

#[test]
fn advantage_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("r.json");
    std::fs::write(&input, "{\"rewards\": [-3, -3, -3, -0.5]}").unwrap();
    let o = slowsql(&["advantage", "--input", path(&input)]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let a: Vec<f64> = v["advantages"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(a[..3].iter().all(|x| (x + 0.4971).abs() < 1e-3));
    assert!((a[3] - 1.4911).abs() < 1e-3);
    let again = slowsql(&["advantage", "--input", path(&input)]);
    assert_eq!(again.stdout, o.stdout);

    std::fs::write(&input, "{\n  \"rewards\": [1.0,\n  oops]\n}").unwrap();
    let o = slowsql(&["advantage", "--input", path(&input)]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    std::fs::write(&input, "[1.0]").unwrap();
    assert_eq!(slowsql(&["advantage", "--input", path(&input)]).status.code(), Some(5));
}

#[test]
fn rollout_plan_from_weights_and_pilot() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.json");
    std::fs::write(&input, "{\"pilot_size\": 4, \"weights\": [0.6666666666666666, 0.3333333333333333, 0.0]}").unwrap();
    let o = slowsql(&["rollout-plan", "--input", path(&input), "--budget", "24"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["allocations"], serde_json::json!([8, 4, 0]));

    let pilot = r#"{"pilot_size": 2, "pilot": [
        {"max_reward": -3.0, "entropy": 0.5, "reward_variance": 0.0},
        {"max_reward": 1.0, "entropy": 0.5, "reward_variance": 0.0}]}"#;
    std::fs::write(&input, pilot).unwrap();
    let o = slowsql(&["rollout-plan", "--input", path(&input), "--budget", "10"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["allocations"], serde_json::json!([6, 0]));
    assert_eq!(slowsql(&["rollout-plan", "--input", path(&input), "--budget", "3"]).status.code(), Some(5));
}

#[test]
fn stats_on_empty_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.jsonl");
    std::fs::write(&c, "{\"format\":\"slowsql-corpus\",\"version\":1,\"schema_id\":\"s\",\"backend_id\":\"b\",\"min_ratio\":2.0}\n").unwrap();
    let o = slowsql(&["stats", "--corpus", path(&c)]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("records        0") && text.contains("avg slowdown   n/a"), "{text}");
    let o = slowsql(&["stats", "--corpus", path(&c), "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["mean_slowdown_ratio"].is_null());
}

fn write_pairs(p: &Path, pairs: &[(&str, &str)]) {
    let text: String = pairs
        .iter()
        .map(|(o, c)| {
            let pair = RepairPair { original_sql: o.to_string(), candidate_sql: c.to_string() };
            serde_json::to_string(&pair).unwrap() + "\n"
        })
        .collect();
    std::fs::write(p, text).unwrap();
}

#[test]
fn repair_keeps_valid_files_and_falls_back_without_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let (input, out) = (dir.path().join("in.jsonl"), dir.path().join("out.jsonl"));
    let w = fixtures::workload();
    let pairs: Vec<(&str, &str)> = w.iter().map(|q| (q.as_str(), q.as_str())).collect();
    write_pairs(&input, &pairs);
    let o = slowsql(&["repair", "--queries", path(&input), "--simulate", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&input).unwrap(), std::fs::read(&out).unwrap());

    write_pairs(&input, &[(w[0].as_str(), "SELCT 1")]);
    let o = slowsql(&["repair", "--queries", path(&input), "--simulate", "--out", path(&out)]);
    assert!(stdout(&o).contains("fallback 1"));
    let back: serde_json::Value = serde_json::from_str(std::fs::read_to_string(&out).unwrap().trim()).unwrap();
    assert_eq!(back["candidate_sql"], w[0].as_str());

    std::fs::write(&input, "{\"original_sql\": \"SELECT 1\"}\n").unwrap();
    let o = slowsql(&["repair", "--queries", path(&input), "--simulate", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn bench_reports_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let (wl, rw, out) = (dir.path().join("w.sql"), dir.path().join("r.sql"), dir.path().join("report.json"));
    let w: Vec<String> = fixtures::workload().into_iter().take(4).collect();
    std::fs::write(&wl, w.join(";\n") + ";\n").unwrap();
    std::fs::write(&rw, w.join(";\n") + ";\n").unwrap();
    let o = slowsql(&["bench", "--workload", path(&wl), "--rewrites", path(&rw), "--simulate", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("equivalence rate 1.00"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["equivalence_rate"], 1.0);
    std::fs::write(&rw, "SELECT 1;").unwrap();
    let o = slowsql(&["bench", "--workload", path(&wl), "--rewrites", path(&rw), "--simulate"]);
    assert_eq!(o.status.code(), Some(5));
}
