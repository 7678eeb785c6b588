use std::path::{Path, PathBuf};

use socialsim_core::engine::{self, EventLog};
use socialsim_core::harness::{read_logs, run_experiment, ExperimentPlan, Manifest};
use socialsim_core::model::{Condition, LoadCondition, NormRegime, RunConfig};
use socialsim_core::policy::{PolicySpec, ScriptStep, ScriptedPolicy};
use socialsim_core::population::{load_corpus, load_population_with};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn tiny_log() -> EventLog {
    let dir = fixtures();
    let population = load_population_with(&dir.join("tiny_population.jsonl"), 2).unwrap();
    let corpus = load_corpus(&dir.join("tiny_corpus.jsonl")).unwrap();
    let script: Vec<ScriptStep> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("tiny_script.json")).unwrap()).unwrap();
    let config = RunConfig {
        n_agents: 5,
        timesteps: 10,
        activation_p: 1.0 - 1e-12,
        influencers: 2,
        condition: Condition::new(LoadCondition::Lowest, NormRegime::LikeDominant),
        policy: PolicySpec::Scripted { script: script.clone() },
        ..RunConfig::default()
    };
    engine::run(&config, &mut ScriptedPolicy::new(script), &population, &corpus).unwrap()
}

#[test]
fn tiny_trace_matches_fixture() {
    let want = std::fs::read_to_string(fixtures().join("tiny_trace.jsonl")).unwrap();
    let got = String::from_utf8(tiny_log().to_jsonl()).unwrap();
    for (i, (g, w)) in got.lines().zip(want.lines()).enumerate() {
        assert_eq!(g, w, "line {}", i + 1);
    }
    assert_eq!(got.lines().count(), want.lines().count());
}

#[test]
fn log_survives_save_and_load() {
    let log = tiny_log();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    log.save(&path).unwrap();
    let back = EventLog::load(&path).unwrap();
    assert_eq!(back.entries, log.entries);
    assert_eq!(back.digest(), log.digest());
}

#[test]
fn malformed_log_line_is_located() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    let mut text = String::from_utf8(tiny_log().to_jsonl()).unwrap();
    text.push_str("{\"run\":0,\"oops\":1}\n");
    std::fs::write(&path, &text).unwrap();
    let err = EventLog::load(&path).unwrap_err().to_string();
    assert!(err.contains(&format!(":{}:", text.lines().count())), "{err}");
}

fn small_plan() -> ExperimentPlan {
    ExperimentPlan {
        loads: vec![LoadCondition::Low, LoadCondition::High],
        norms: vec![NormRegime::NoNorm],
        replications: 2,
        run: RunConfig { n_agents: 50, timesteps: 40, activation_p: 0.1, ..RunConfig::default() },
        workers: 2,
        ..ExperimentPlan::default()
    }
}

#[test]
fn experiment_writes_manifest_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = run_experiment(&small_plan(), dir.path()).unwrap();
    assert_eq!(manifest.cells.len(), 4);
    assert_eq!(manifest.failures(), 0);
    let reread = Manifest::load(dir.path()).unwrap();
    assert_eq!(reread.to_json(), manifest.to_json());
    let logs = read_logs(dir.path()).unwrap();
    assert_eq!(logs.len(), 4);
    assert!(logs.iter().all(|l| l.exposures().count() > 0));
}

#[test]
fn tampered_log_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = run_experiment(&small_plan(), dir.path()).unwrap();
    let file = manifest.cells[0].file.clone().unwrap();
    let path = dir.path().join(&file);
    let mut text = std::fs::read_to_string(&path).unwrap();
    text = text.replacen("\"read\"", "\"like\"", 1);
    std::fs::write(&path, text).unwrap();
    let err = read_logs(dir.path()).unwrap_err().to_string();
    assert!(err.contains(&file), "{err}");
}
