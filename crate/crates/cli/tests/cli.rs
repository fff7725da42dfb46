use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_tabqa");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn tabqa(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("TABQA_CONFIG").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ask_writes_a_schema_valid_dashboard() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dashboard.json");
    let cars = fixture("cars.csv");
    let o = tabqa(&["ask", "--table", path_str(&cars), "How is the sales?", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.starts_with("How is the sales?"));
    assert_eq!(text.matches("\n## ").count(), 3);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&tabqa_core::schema::schema("ask-response").unwrap()).unwrap();
    assert!(validator.is_valid(&v));
}

#[test]
fn ask_json_matches_the_written_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.json");
    let cars = fixture("cars.csv");
    let o = tabqa(&["--json", "ask", "--table", path_str(&cars), "what is the total sales?", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0);
    let file: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(stdout_json(&o), file);
}

#[test]
fn input_errors_exit_two_with_json() {
    let cars = fixture("cars.csv");
    let o = tabqa(&["ask", "--table", path_str(&cars), "   "]);
    assert_eq!(code(&o), 2);
    assert_eq!(stderr_json(&o)["error"], "input");

    let o = tabqa(&["ask", "--table", "/no/such/table.csv", "what is the total sales?"]);
    assert_eq!(code(&o), 2);
    assert!(stderr_json(&o)["message"].as_str().unwrap().contains("/no/such/table.csv"));

    let o = tabqa(&["ask", "--table", path_str(&cars), "q", "--backend", "neural"]);
    assert_eq!(code(&o), 2);
    assert!(stderr_json(&o)["message"].as_str().unwrap().contains("--model"));

    let o = tabqa(&["ask", "--table", path_str(&cars), "q", "--beam", "0"]);
    assert_eq!(code(&o), 2);

    let o = tabqa(&["frobnicate"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unanswerable_exits_three_with_reasons() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("labels.csv");
    std::fs::write(&t, "a,b\nx,y\nz,w\n").unwrap();
    let o = tabqa(&["ask", "--table", path_str(&t), "what is the total b?"]);
    assert_eq!(code(&o), 3);
    let e = stderr_json(&o);
    assert_eq!(e["error"], "unanswerable");
    assert_eq!(e["reasons"][0], "no numerical column");
}

#[test]
fn decompose_prints_the_tree() {
    let books = fixture("books.csv");
    let o = tabqa(&["--json", "decompose", "--table", path_str(&books), "Which book is expensive and well-regarded?"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["class"], "type-i");
    assert_eq!(v["children"].as_array().unwrap().len(), 2);
}

#[test]
fn facts_are_truncated_and_sorted() {
    let cars = fixture("cars.csv");
    let o = tabqa(&["--json", "facts", "--table", path_str(&cars), "which brand has the highest sales?", "--k", "7"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    let facts = v.as_array().unwrap();
    assert_eq!(facts.len(), 7);
    let scores: Vec<f64> = facts.iter().map(|f| f["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert!(facts.iter().all(|f| f["type"] == "extreme"));
}

#[test]
fn config_file_sets_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"beam_width": 1}"#).unwrap();
    let cars = fixture("cars.csv");
    let q = "what is the trend of sales and which brand has the highest sales?";
    let charts = |o: &Output| -> Vec<usize> {
        stdout_json(o)["dashboard"]["sections"].as_array().unwrap().iter().map(|s| s["charts"].as_array().unwrap().len()).collect()
    };
    let o = tabqa(&["--json", "--config", path_str(&cfg), "ask", "--table", path_str(&cars), q]);
    assert_eq!(code(&o), 0);
    assert_eq!(charts(&o), [1, 1]);
    let o = tabqa(&["--json", "--config", path_str(&cfg), "ask", "--table", path_str(&cars), q, "--beam", "3"]);
    assert_eq!(charts(&o), [3, 3]);

    std::fs::write(&cfg, r#"{"beam": 1}"#).unwrap();
    let o = tabqa(&["--config", path_str(&cfg), "ask", "--table", path_str(&cars), q]);
    assert_eq!(code(&o), 2);
}

#[test]
fn corpus_generate_is_deterministic_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let tables = dir.path().join("tables");
    std::fs::create_dir(&tables).unwrap();
    for t in ["books.csv", "cars.csv"] {
        std::fs::copy(fixture(t), tables.join(t)).unwrap();
    }
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for out in [&a, &b] {
        let o = tabqa(&["--seed", "9", "corpus", "generate", "--tables", path_str(&tables), "--out", path_str(out), "--per-method", "5"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.lines().next().unwrap().contains("\"seed\":9"));

    let o = tabqa(&["corpus", "validate", "--in", path_str(&a), "--tables", path_str(&tables)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    // relabel a Type-I entry as Type-II
    let tampered = dir.path().join("t.jsonl");
    std::fs::write(&tampered, text.replacen("\"method\":\"comparison\"", "\"method\":\"no-measure\"", 1)).unwrap();
    let o = tabqa(&["--json", "corpus", "validate", "--in", path_str(&tampered), "--tables", path_str(&tables)]);
    assert_eq!(code(&o), 2);
    assert!(!stdout_json(&o)["violations"].as_array().unwrap().is_empty());
}

#[test]
fn train_eval_and_neural_backend() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    let model = dir.path().join("model.bin");
    let log = dir.path().join("loss.csv");
    assert_eq!(code(&tabqa(&["corpus", "generate", "--out", path_str(&corpus), "--per-method", "2"])), 0);
    let o = tabqa(&[
        "train", "--corpus", path_str(&corpus), "--out", path_str(&model), "--log", path_str(&log), "--epochs", "2", "--limit", "4",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&log).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("epoch,loss,token_accuracy"));

    let o = tabqa(&["--json", "eval", "--corpus", path_str(&corpus), "--model", path_str(&model)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!((0.0..=1.0).contains(&v["bleu"].as_f64().unwrap()));

    let cars = fixture("cars.csv");
    let o = tabqa(&["decompose", "--table", path_str(&cars), "what is the trend of sales and which brand has the highest sales?",
        "--backend", "neural", "--model", path_str(&model)]);
    assert!(matches!(code(&o), 0 | 3), "{}", String::from_utf8_lossy(&o.stderr));

    let broken = dir.path().join("broken.bin");
    std::fs::write(&broken, "{}").unwrap();
    let o = tabqa(&["decompose", "--table", path_str(&cars), "q", "--backend", "neural", "--model", path_str(&broken)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn eval_of_references_against_themselves_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    assert_eq!(code(&tabqa(&["corpus", "generate", "--out", path_str(&corpus), "--per-method", "2"])), 0);
    let text = std::fs::read_to_string(&corpus).unwrap();
    let cands: Vec<String> = text
        .lines()
        .skip(1)
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["sub_questions"].to_string())
        .collect();
    let cand_path = dir.path().join("cand.jsonl");
    std::fs::write(&cand_path, cands.join("\n")).unwrap();
    let o = tabqa(&["--json", "eval", "--corpus", path_str(&corpus), "--candidates", path_str(&cand_path)]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["bleu"], 1.0);
    assert_eq!(v["meteor_lite"], 1.0);

    std::fs::write(&cand_path, &cands[0]).unwrap();
    let o = tabqa(&["eval", "--corpus", path_str(&corpus), "--candidates", path_str(&cand_path)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn training_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    assert_eq!(code(&tabqa(&["corpus", "generate", "--out", path_str(&corpus), "--per-method", "1"])), 0);
    let model = dir.path().join("m.bin");
    let cfg = dir.path().join("train.json");
    let base = serde_json::to_value(tabqa_neural::TrainConfig::toy(0)).unwrap();

    let mut bad = base.clone();
    bad["model"]["hidden_dim"] = 0.into();
    std::fs::write(&cfg, bad.to_string()).unwrap();
    let o = tabqa(&["train", "--corpus", path_str(&corpus), "--train-config", path_str(&cfg), "--out", path_str(&model), "--epochs", "1", "--limit", "2"]);
    assert_eq!(code(&o), 2);

    let mut wild = base;
    wild["model"]["learning_rate"] = 1e300.into();
    wild["clip_norm"] = 0.0.into();
    std::fs::write(&cfg, wild.to_string()).unwrap();
    let o = tabqa(&["train", "--corpus", path_str(&corpus), "--train-config", path_str(&cfg), "--out", path_str(&model), "--epochs", "3", "--limit", "2"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stderr_json(&o)["error"], "training");
}

#[test]
fn serve_answers_health() {
    let mut child = Command::new(BIN)
        .args(["serve", "--port", "0"])
        .env_remove("TABQA_CONFIG")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().trim_start_matches("listening on http://").to_string();
    let mut s = std::net::TcpStream::connect(&addr).unwrap();
    write!(s, "GET /api/health HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    let _ = child.wait();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.contains("\"status\":\"ok\""));
}
