use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use smartfilter_core::model::io;
use smartfilter_fixtures::{generate, FixturePaths, FixtureSpec};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_smartfilter"))
}

struct Env {
    dir: TempDir,
    paths: FixturePaths,
}

impl Env {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let paths = generate(&FixtureSpec::small())
            .write_to(dir.path())
            .unwrap();
        Env { dir, paths }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn args(&self, sub: &str, out: &Path) -> Command {
        let mut cmd = bin();
        cmd.arg(sub)
            .arg("--dataset")
            .arg(&self.paths.dataset)
            .arg("--predictions")
            .arg(&self.paths.predictions)
            .arg("--config")
            .arg(&self.paths.config)
            .arg("--out")
            .arg(out);
        cmd
    }

    fn with_embeddings(&self, sub: &str, out: &Path) -> Command {
        let mut cmd = self.args(sub, out);
        cmd.arg("--embeddings")
            .arg(&self.paths.embeddings)
            .arg("--manifest")
            .arg(&self.paths.manifest);
        cmd
    }
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_consistent_fixture() {
    let env = Env::new();
    let out = env.out("v");
    let o = run(&mut env.with_embeddings("validate", &out));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("validation.json"));
    assert_eq!(report["failures"].as_array().unwrap().len(), 0);
}

#[test]
fn validate_reports_missing_row() {
    let env = Env::new();
    let file = env.paths.predictions.join("model-c.full_prompt.jsonl");
    let text = fs::read_to_string(&file).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let removed = lines.remove(5).to_string();
    fs::write(&file, lines.join("\n") + "\n").unwrap();
    let id: Value = serde_json::from_str(&removed).unwrap();

    let out = env.out("v");
    let o = run(&mut env.with_embeddings("validate", &out));
    assert_eq!(code(&o), 1);
    let report = json(&out.join("validation.json"));
    let failures = report["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0]["example_id"], id["example_id"]);
    assert_eq!(failures[0]["set"], "model-c/full_prompt");

    // The filter refuses to run and writes nothing.
    let filtered = env.out("f");
    assert_eq!(code(&run(&mut env.with_embeddings("filter", &filtered))), 1);
    assert!(!filtered.exists());
}

#[test]
fn bad_embedding_magic_is_an_input_error() {
    let env = Env::new();
    let mut bytes = fs::read(&env.paths.embeddings).unwrap();
    bytes[..5].copy_from_slice(b"XXXXX");
    fs::write(&env.paths.embeddings, bytes).unwrap();
    let o = run(&mut env.with_embeddings("validate", &env.out("v")));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("magic"));
}

#[test]
fn unreadable_path_is_an_input_error() {
    let env = Env::new();
    let mut cmd = bin();
    cmd.args([
        "validate",
        "--dataset",
        "/nonexistent/data.jsonl",
        "--predictions",
    ])
    .arg(&env.paths.predictions)
    .arg("--embeddings")
    .arg(&env.paths.embeddings)
    .arg("--manifest")
    .arg(&env.paths.manifest)
    .arg("--out")
    .arg(env.out("v"));
    let o = run(&mut cmd);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/data.jsonl"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&run(bin().arg("filter"))), 2);
    let env = Env::new();
    let mut cmd = env.with_embeddings("filter", &env.out("f"));
    cmd.args(["--step-order", "easy,easy,similarity"]);
    assert_eq!(code(&run(&mut cmd)), 2);
}

#[test]
fn filter_writes_outputs_and_report_sections() {
    let env = Env::new();
    let out = env.out("f");
    let mut cmd = env.with_embeddings("filter", &out);
    cmd.arg("--elo").arg(&env.paths.elo);
    let o = run(&mut cmd);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for name in [
        "filtered.jsonl",
        "ledger.jsonl",
        "similarity.json",
        "report.json",
        "run.json",
        "filtering.csv",
        "accuracy.csv",
        "correlation.csv",
        "agreement_original.csv",
        "agreement_filtered.csv",
        "ablation.csv",
        "categories.csv",
        "similarity_histogram.csv",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let report = json(&out.join("report.json"));
    for section in [
        "filtering",
        "accuracy",
        "correlation",
        "agreement",
        "ablation",
        "categories",
    ] {
        assert!(!report[section].is_null(), "missing section {section}");
    }
    assert!(report["correlation"]["pearson"].is_object());
    assert_eq!(report["filtering"]["reconciles"], true);

    let ledger = io::load_ledger(&out.join("ledger.jsonl")).unwrap();
    let filtered = io::load_dataset(&out.join("filtered.jsonl")).unwrap();
    assert_eq!(filtered.len(), ledger.kept_count());
}

#[test]
fn zero_retention_keeps_no_easy_examples() {
    let env = Env::new();
    let config = fs::read_to_string(&env.paths.config)
        .unwrap()
        .replace("retention_fraction = 0.1", "retention_fraction = 0.0");
    assert!(config.contains("retention_fraction = 0.0"), "{config}");
    fs::write(&env.paths.config, config).unwrap();
    let out = env.out("f");
    assert_eq!(code(&run(&mut env.with_embeddings("filter", &out))), 0);
    let ledger = io::load_ledger(&out.join("ledger.jsonl")).unwrap();
    assert!(ledger.count(|e| e.easy) > 0);
    assert_eq!(ledger.count(|e| e.retained_easy), 0);
}

#[test]
fn step_order_does_not_change_the_ledger() {
    let env = Env::new();
    let a = env.out("a");
    let b = env.out("b");
    assert_eq!(code(&run(&mut env.with_embeddings("filter", &a))), 0);
    let mut cmd = env.with_embeddings("filter", &b);
    cmd.args(["--step-order", "similarity,contamination,easy"]);
    assert_eq!(code(&run(&mut cmd)), 0);
    assert_eq!(
        fs::read(a.join("ledger.jsonl")).unwrap(),
        fs::read(b.join("ledger.jsonl")).unwrap()
    );
}

#[test]
fn report_from_ledger_without_elo() {
    let env = Env::new();
    let f = env.out("f");
    assert_eq!(code(&run(&mut env.with_embeddings("filter", &f))), 0);

    let r1 = env.out("r1");
    let r2 = env.out("r2");
    for out in [&r1, &r2] {
        let mut cmd = env.args("report", out);
        cmd.arg("--ledger").arg(f.join("ledger.jsonl"));
        let o = run(&mut cmd);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let report = json(&r1.join("report.json"));
    assert!(report["correlation"].get("pearson").is_none());
    assert!(report["correlation"]["notices"]
        .as_array()
        .unwrap()
        .iter()
        .any(|n| n.as_str().unwrap().contains("Elo")));
    assert!(report["similarity"].is_object());
    assert_eq!(
        fs::read(r1.join("report.json")).unwrap(),
        fs::read(r2.join("report.json")).unwrap()
    );
    // Same ledger, same numbers as the filter's own report (inputs differ).
    let original = json(&f.join("report.json"));
    assert_eq!(original["filtering"], report["filtering"]);
    assert_eq!(original["ablation"], report["ablation"]);
}

#[test]
fn ablate_contract() {
    let env = Env::new();
    let f = env.out("f");
    assert_eq!(code(&run(&mut env.with_embeddings("filter", &f))), 0);
    let main_pct = json(&f.join("report.json"))["filtering"]["filtered_pct"]
        .as_f64()
        .unwrap();

    let ablate = |out: &Path, sizes: &[&str]| {
        let mut cmd = env.args("ablate", out);
        cmd.arg("--ledger")
            .arg(f.join("ledger.jsonl"))
            .args(["--draws", "10"]);
        for s in sizes {
            cmd.args(["--size", s]);
        }
        run(&mut cmd)
    };
    let a = env.out("a");
    assert_eq!(code(&ablate(&a, &["7", "4"])), 0);
    let rows = json(&a.join("ablation.json"));
    let rows = rows.as_array().unwrap();
    let full = rows.iter().find(|r| r["subset_size"] == 7).unwrap();
    assert_eq!(full["std"].as_f64().unwrap(), 0.0);
    assert_eq!(full["mean"].as_f64().unwrap(), main_pct);
    let four = rows.iter().find(|r| r["subset_size"] == 4).unwrap();
    assert_eq!(four["draws"].as_array().unwrap().len(), 10);

    let b = env.out("b");
    assert_eq!(code(&ablate(&b, &["7", "4"])), 0);
    assert_eq!(
        fs::read(a.join("ablation.json")).unwrap(),
        fs::read(b.join("ablation.json")).unwrap()
    );

    assert_eq!(code(&ablate(&env.out("c"), &["8"])), 2);
}

#[test]
fn ablate_without_ledger_runs_the_filter() {
    let env = Env::new();
    let out = env.out("a");
    let mut cmd = env.with_embeddings("ablate", &out);
    cmd.args(["--size", "6", "--draws", "3"]);
    let o = run(&mut cmd);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = json(&out.join("ablation.json"));
    assert_eq!(rows[0]["draws"].as_array().unwrap().len(), 3);
}
