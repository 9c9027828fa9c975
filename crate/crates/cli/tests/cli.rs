use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/tiny")
}

fn goalrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goalrec"))
        .args(args)
        .output()
        .expect("spawn goalrec")
}

fn ok(args: &[&str]) -> String {
    let out = goalrec(args);
    assert!(
        out.status.success(),
        "goalrec {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Trains on the fixture and returns the checkpoint path.
fn train_fixture(dir: &Path, extra: &[&str]) -> PathBuf {
    let ckpt = dir.join("m.ckpt");
    let fx = fixture();
    let mut args = vec!["train", "--corpus", s(&fx), "--checkpoint", s(&ckpt)];
    args.extend_from_slice(&["--d", "16", "--eta", "0.05", "--epochs", "50", "--seed", "7"]);
    args.extend_from_slice(extra);
    ok(&args);
    ckpt
}

fn report_lines(ckpt: &Path) -> Vec<serde_json::Value> {
    let text = fs::read_to_string(format!("{}.report.jsonl", ckpt.display())).unwrap();
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn train_writes_checkpoint_and_rising_objective() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_fixture(dir.path(), &[]);
    assert!(ckpt.exists());
    let objectives: Vec<f64> = report_lines(&ckpt)
        .iter()
        .filter(|r| r["type"] == "epoch")
        .map(|r| r["objective"].as_f64().unwrap())
        .collect();
    assert!(objectives.len() >= 2);
    assert!(objectives.last().unwrap() > objectives.first().unwrap());
    let summary = report_lines(&ckpt).pop().unwrap();
    assert_eq!(summary["ablation_arm"], "attention");
}

#[test]
fn train_echoes_default_hyperparameters() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("m.ckpt");
    let fx = fixture();
    let out = ok(&["train", "--corpus", s(&fx), "--checkpoint", s(&ckpt), "--epochs", "1", "--seed", "1"]);
    assert!(out.contains("d=100 eta=0.001 r=0.20"), "{out}");
}

#[test]
fn missing_corpus_is_a_usage_error() {
    let out = goalrec(&["train"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--corpus"));
}

#[test]
fn unreadable_corpus_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = goalrec(&["train", "--corpus", s(&dir.path().join("nope")), "--seed", "1"]);
    assert!(!out.status.success());
}

#[test]
fn no_attention_marks_ablation_arm() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_fixture(dir.path(), &["--no-attention"]);
    let summary = report_lines(&ckpt).pop().unwrap();
    assert_eq!(summary["type"], "summary");
    assert_eq!(summary["ablation_arm"], "uniform");
}

#[test]
fn missing_seed_is_printed() {
    let dir = tempfile::tempdir().unwrap();
    let out = goalrec(&["make-synthetic", "--out", s(dir.path()), "--mashups", "20"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed: "));
}

#[test]
fn oracle_eval_row_is_all_ones() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_fixture(dir.path(), &[]);
    let fx = fixture();
    let out = ok(&["eval", "--corpus", s(&fx), "--checkpoint", s(&ckpt), "--scorer", "oracle", "--seed", "1"]);
    let mut lines = out.lines();
    let header: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["Method", "REC@3", "REC@5", "REC@10", "REC@20", "MRR"]);
    let row: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(row[0], "oracle");
    assert!(row[1..].iter().all(|v| *v == "1.0000"), "{row:?}");
}

#[test]
fn eval_json_and_custom_k() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_fixture(dir.path(), &[]);
    let fx = fixture();
    let out = ok(&[
        "eval", "--corpus", s(&fx), "--checkpoint", s(&ckpt), "--k", "1,2", "--format", "json", "--seed", "1",
    ]);
    let metrics: Vec<String> = out
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter_map(|v| v["metric"].as_str().map(str::to_string))
        .collect();
    assert_eq!(metrics, ["REC@1", "REC@2", "MRR"]);
}

#[test]
fn stepwise_writes_one_csv_per_group() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_fixture(dir.path(), &["--train-fraction", "0.5"]);
    let fx = fixture();
    let out_dir = dir.path().join("steps");
    ok(&[
        "eval", "--corpus", s(&fx), "--checkpoint", s(&ckpt), "--stepwise", s(&out_dir), "--seed", "1",
    ]);
    let split: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(format!("{}.split.json", ckpt.display())).unwrap()).unwrap();
    let corpus = mashup_sizes(&fx);
    let mut sizes: Vec<usize> = split["test"]
        .as_array()
        .unwrap()
        .iter()
        .map(|id| corpus[id.as_str().unwrap()])
        .collect();
    sizes.sort();
    sizes.dedup();
    let mut files: Vec<String> = fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    let expected: Vec<String> = sizes.iter().map(|n| format!("stepwise_size{n}.csv")).collect();
    assert_eq!(files, expected);
    for (f, n) in files.iter().zip(&sizes) {
        let csv = fs::read_to_string(out_dir.join(f)).unwrap();
        assert!(csv.starts_with("step,instances,"));
        assert_eq!(csv.lines().count(), n + 1);
    }
}

fn mashup_sizes(corpus: &Path) -> std::collections::HashMap<String, usize> {
    fs::read_to_string(corpus.join("mashups.jsonl"))
        .unwrap()
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            (v["id"].as_str().unwrap().to_string(), v["service_ids"].as_array().unwrap().len())
        })
        .collect()
}

#[test]
fn make_synthetic_is_seeded() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        vec![
            "make-synthetic".to_string(),
            "--out".into(),
            s(d).into(),
            "--services".into(),
            "60".into(),
            "--groups".into(),
            "12".into(),
            "--mashups".into(),
            "300".into(),
            "--per-mashup".into(),
            "3".into(),
            "--seed".into(),
            "1".into(),
        ]
    };
    for d in [a.path(), b.path()] {
        let argv = args(d);
        let refs: Vec<&str> = argv.iter().map(String::as_str).collect();
        ok(&refs);
    }
    let services = fs::read_to_string(a.path().join("services.jsonl")).unwrap();
    assert_eq!(services.lines().count(), 60);
    assert_eq!(fs::read_to_string(a.path().join("mashups.jsonl")).unwrap().lines().count(), 300);
    for f in ["services.jsonl", "mashups.jsonl"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn make_synthetic_rejects_bad_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = goalrec(&["make-synthetic", "--out", s(dir.path()), "--services", "5", "--groups", "12", "--seed", "1"]);
    assert!(!out.status.success());
}

#[test]
fn recommend_prints_json_response() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_fixture(dir.path(), &[]);
    let fx = fixture();
    let out = ok(&[
        "recommend", "--corpus", s(&fx), "--checkpoint", s(&ckpt), "--goal", "photos on a map", "--selected", "gmaps",
        "--k", "3", "--format", "json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let items = v["items"].as_array().unwrap();
    assert_eq!(items.len(), 3);
    assert!(items.iter().all(|i| i["service_id"] != "gmaps"));
    assert_eq!(v["attention"][0]["service_id"], "gmaps");
    assert_eq!(v["model_info"]["d"], 16);
}

#[test]
fn recommend_rejects_unknown_service() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train_fixture(dir.path(), &[]);
    let fx = fixture();
    let out = goalrec(&["recommend", "--corpus", s(&fx), "--checkpoint", s(&ckpt), "--selected", "nope"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown_service"));
}
