use std::path::Path;
use std::process::{Command, Output};

fn socialsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_socialsim"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_PLAN: &str = r#"{
  "base_seed": 5,
  "run": { "n_agents": 60, "timesteps": 60, "activation_p": 0.1 },
  "population": { "source": "generate", "seed": 2 },
  "corpus": { "source": "generate", "seed": 2 },
  "workers": 4
}"#;

fn small_plan(dir: &Path) {
    std::fs::write(dir.join("plan.json"), SMALL_PLAN).unwrap();
}

fn csv_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn single_cell_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    small_plan(dir.path());
    for out in ["a", "b"] {
        let o = socialsim(
            &["simulate", "--config", "plan.json", "--out", out, "--cell", "load=high,norm=repost", "--policy", "mock"],
            dir.path(),
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let logs: Vec<_> = std::fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".jsonl"))
        .collect();
    assert_eq!(logs, ["cell_high_repost_r0.jsonl"]);
    let a = std::fs::read(dir.path().join("a/manifest.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/manifest.json")).unwrap();
    assert_eq!(a, b);

    let o = socialsim(
        &["simulate", "--config", "plan.json", "--out", "c", "--cell", "load=high,norm=repost", "--seed", "6"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert_ne!(a, std::fs::read(dir.path().join("c/manifest.json")).unwrap());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = socialsim(&["simulate", "--config", "missing.json", "--out", "x"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing.json"));

    let o = socialsim(&["simulate", "--out", "x", "--no-such-flag"], dir.path());
    assert_eq!(code(&o), 2);

    let o = socialsim(&["simulate", "--out", "x", "--cell", "load=enormous,norm=like"], dir.path());
    assert_eq!(code(&o), 2);

    std::fs::write(dir.path().join("bad.json"), r#"{"run": {"activation_p": 1.5}}"#).unwrap();
    let o = socialsim(&["simulate", "--config", "bad.json", "--out", "x"], dir.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("activation_p"));

    small_plan(dir.path());
    let o = socialsim(&["simulate", "--config", "plan.json", "--out", "x", "--transport", "live"], dir.path());
    assert_eq!(code(&o), 2);
    let o = socialsim(&["simulate", "--config", "plan.json", "--out", "x", "--transport", "fixtures"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn help_lists_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = socialsim(&["simulate", "--help"], dir.path());
    assert_eq!(code(&o), 0);
    let help = String::from_utf8_lossy(&o.stdout);
    for flag in ["--config", "--out", "--cell", "--policy", "--transport", "--fixtures", "--seed", "--workers"] {
        assert!(help.contains(flag), "missing {flag}");
    }
    for sub in ["gen-population", "gen-corpus", "analyze", "report"] {
        assert_eq!(code(&socialsim(&[sub, "--help"], dir.path())), 0);
    }
}

#[test]
fn analyze_and_report() {
    let dir = tempfile::tempdir().unwrap();
    small_plan(dir.path());
    let o = socialsim(&["simulate", "--config", "plan.json", "--out", "run", "--policy", "mock"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let o = socialsim(&["analyze", "--logs", "run", "--out", "ana"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ana = dir.path().join("ana");
    assert_eq!(csv_rows(&ana.join("threshold_coefficients.csv")), 24);
    assert_eq!(csv_rows(&ana.join("allocation_coefficients.csv")), 48);
    assert_eq!(csv_rows(&ana.join("descriptive_shares.csv")), 12);
    assert_eq!(csv_rows(&ana.join("load_audit.csv")), 12);
    let header = std::fs::read_to_string(ana.join("threshold_coefficients.csv")).unwrap();
    assert!(header.starts_with("term,B,SE,OR,p,converged\n"));
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ana.join("fit_metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["threshold"]["df"], 23);

    let o = socialsim(&["report", "--analysis", "ana", "--out", "rep"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let files: Vec<String> = std::fs::read_dir(dir.path().join("rep"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(files.iter().filter(|f| f.ends_with(".svg")).count() >= 2);
    assert_eq!(files.iter().filter(|f| f.ends_with(".md")).count(), 1);
    let curves = std::fs::read_to_string(dir.path().join("rep/threshold_curves.svg")).unwrap();
    assert_eq!(curves.matches("<polyline").count(), 12);

    // Threshold only: no allocation outputs.
    let o = socialsim(&["analyze", "--logs", "run", "--out", "thr", "--stage", "threshold"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("thr/threshold_coefficients.csv").exists());
    assert!(!dir.path().join("thr/allocation_coefficients.csv").exists());

    // Custom grid.
    std::fs::write(dir.path().join("grid.csv"), "composite,load,norm\n0,lowest,none\n2.5,high,repost\n").unwrap();
    let o = socialsim(&["analyze", "--logs", "run", "--out", "g", "--stage", "threshold", "--grid", "grid.csv"], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(csv_rows(&dir.path().join("g/threshold_predictions.csv")), 2);

    // Missing analysis file is named.
    std::fs::remove_file(ana.join("load_audit.csv")).unwrap();
    let o = socialsim(&["report", "--analysis", "ana", "--out", "rep2"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("load_audit.csv"));
}

#[test]
fn analyze_without_logs_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = socialsim(&["analyze", "--logs", "nothing", "--out", "ana"], dir.path());
    assert_eq!(code(&o), 1);
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let o = socialsim(&["analyze", "--logs", "empty", "--out", "ana"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn generated_inputs_feed_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = socialsim(&["gen-population", "--agents", "40", "--seed", "3", "--out", "pop.jsonl"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = socialsim(&["gen-corpus", "--seed", "3", "--out", "corpus.jsonl"], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(dir.path().join("pop.jsonl")).unwrap().lines().count(), 40);
    assert_eq!(std::fs::read_to_string(dir.path().join("corpus.jsonl")).unwrap().lines().count(), 50);

    let plan = r#"{
      "run": { "n_agents": 40, "timesteps": 20, "activation_p": 0.1 },
      "population": { "source": "file", "path": "pop.jsonl" },
      "corpus": { "source": "file", "path": "corpus.jsonl" }
    }"#;
    std::fs::write(dir.path().join("plan.json"), plan).unwrap();
    let o = socialsim(
        &["simulate", "--config", "plan.json", "--out", "run", "--cell", "load=low,norm=like", "--policy", "read-only"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let o = socialsim(&["gen-population", "--agents", "5", "--out", "tiny.jsonl"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn fixture_replay_matches_recording() {
    let dir = tempfile::tempdir().unwrap();
    let plan = r#"{
      "loads": ["low"],
      "norms": ["like", "repost"],
      "run": {
        "n_agents": 40, "timesteps": 20, "activation_p": 0.1,
        "policy": { "kind": "llm", "endpoint": "http://127.0.0.1:9/v1", "model": "test-model" }
      }
    }"#;
    std::fs::write(dir.path().join("plan.json"), plan).unwrap();
    let o = socialsim(
        &["simulate", "--config", "plan.json", "--out", "rec", "--transport", "mock", "--record-fixtures"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    std::fs::create_dir(dir.path().join("fx")).unwrap();
    for e in std::fs::read_dir(dir.path().join("rec")).unwrap() {
        let name = e.unwrap().file_name().into_string().unwrap();
        if name.ends_with(".fixtures.jsonl") {
            std::fs::copy(dir.path().join("rec").join(&name), dir.path().join("fx").join(&name)).unwrap();
        }
    }
    for out in ["r1", "r2"] {
        let o = socialsim(
            &["simulate", "--config", "plan.json", "--out", out, "--transport", "fixtures", "--fixtures", "fx"],
            dir.path(),
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let logs = |d: &str| {
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(d).join("manifest.json")).unwrap()).unwrap();
        m["cells"].as_array().unwrap().iter().map(|c| c["sha256"].clone()).collect::<Vec<_>>()
    };
    assert_eq!(logs("rec"), logs("r1"));
    assert_eq!(
        std::fs::read(dir.path().join("r1/manifest.json")).unwrap(),
        std::fs::read(dir.path().join("r2/manifest.json")).unwrap()
    );
}
