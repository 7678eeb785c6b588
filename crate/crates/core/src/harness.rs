//! The 4 x 3 factorial experiment: plan, per-cell runs, persisted logs,
//! manifest, and the descriptive audits computed from the logs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digest::{sha256_hex, sha256_u64};
use crate::engine::{self, EventLog};
use crate::error::{Error, Result};
use crate::model::{ActionKind, AgentId, Condition, ExposureRecord, FeedSlot, LoadCondition, NormRegime, RunConfig, RunId};
use crate::policy::{
    build_policy, ChatTransport, FixtureTransport, HttpTransport, MockTransport, PolicySpec, RecordingTransport,
};
use crate::population::{
    generate_population_with, generate_seed_corpus, load_corpus, load_population_with, NetworkParams, Population,
    SeedCorpus,
};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Where a shared input comes from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum InputSource {
    Generate { seed: u64 },
    File { path: PathBuf },
}

/// How Llm policies reach a model. Ignored by the other policy kinds.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TransportMode {
    #[default]
    Mock,
    Fixtures { path: PathBuf },
    Live,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    pub loads: Vec<LoadCondition>,
    pub norms: Vec<NormRegime>,
    pub replications: u32,
    pub base_seed: u64,
    /// Per-run parameters shared by every cell. Its `condition`, `seed` and
    /// `run` fields are overwritten per cell.
    pub run: RunConfig,
    pub population: InputSource,
    pub corpus: InputSource,
    pub transport: TransportMode,
    /// Save every model exchange of each cell as a fixture file.
    pub record_fixtures: bool,
    pub workers: usize,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            loads: LoadCondition::ALL.to_vec(),
            norms: NormRegime::ALL.to_vec(),
            replications: 1,
            base_seed: 1,
            run: RunConfig::default(),
            population: InputSource::Generate { seed: 1 },
            corpus: InputSource::Generate { seed: 1 },
            transport: TransportMode::Mock,
            record_fixtures: false,
            workers: 4,
        }
    }
}

/// One run of the plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub run: RunId,
    pub condition: Condition,
    pub replication: u32,
    pub seed: u64,
}

impl Cell {
    pub fn file_stem(&self) -> String {
        format!("cell_{}_{}_r{}", self.condition.load, self.condition.norm, self.replication)
    }
}

pub fn cell_seed(base: u64, condition: Condition, replication: u32) -> u64 {
    sha256_u64(format!("{base}:{}:{}:{replication}", condition.load, condition.norm))
}

impl ExperimentPlan {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        let plan: ExperimentPlan =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.loads.is_empty() || self.norms.is_empty() {
            return Err(Error::Config("plan needs at least one load level and one norm regime".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        self.run.validate()
    }

    /// Cells in load-major order, replications innermost.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &load in &self.loads {
            for &norm in &self.norms {
                for replication in 0..self.replications {
                    let condition = Condition::new(load, norm);
                    out.push(Cell {
                        run: RunId(out.len() as u32),
                        condition,
                        replication,
                        seed: cell_seed(self.base_seed, condition, replication),
                    });
                }
            }
        }
        out
    }

    pub fn cell_config(&self, cell: &Cell) -> RunConfig {
        RunConfig { condition: cell.condition, seed: cell.seed, run: cell.run, ..self.run.clone() }
    }

    pub fn load_population(&self) -> Result<Population> {
        match &self.population {
            InputSource::Generate { seed } => generate_population_with(
                self.run.n_agents,
                *seed,
                &NetworkParams { influencers: self.run.influencers, ..NetworkParams::default() },
            ),
            InputSource::File { path } => load_population_with(path, self.run.influencers),
        }
    }

    pub fn load_corpus(&self) -> Result<SeedCorpus> {
        match &self.corpus {
            InputSource::Generate { seed } => Ok(generate_seed_corpus(*seed)),
            InputSource::File { path } => load_corpus(path),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellEntry {
    pub run: RunId,
    pub load: LoadCondition,
    pub norm: NormRegime,
    pub replication: u32,
    pub seed: u64,
    pub config_sha256: String,
    pub status: CellStatus,
    pub file: Option<String>,
    pub sha256: Option<String>,
    pub lines: Option<usize>,
    pub activations: Option<u64>,
    pub fixtures: Option<String>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub plan: ExperimentPlan,
    pub population_sha256: String,
    pub corpus_sha256: String,
    pub cells: Vec<CellEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.status == CellStatus::Failed).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

fn transport_for(plan: &ExperimentPlan, fixtures: Option<&FixtureTransport>) -> Result<Option<Box<dyn ChatTransport>>> {
    let PolicySpec::Llm(spec) = &plan.run.policy else {
        return Ok(None);
    };
    Ok(Some(match &plan.transport {
        TransportMode::Mock => Box::new(MockTransport),
        TransportMode::Fixtures { .. } => Box::new(fixtures.cloned().expect("fixtures loaded up front")),
        TransportMode::Live => Box::new(HttpTransport::new(&spec.endpoint, Duration::from_secs(spec.timeout_secs))),
    }))
}

fn run_cell(
    plan: &ExperimentPlan,
    cell: &Cell,
    population: &Population,
    corpus: &SeedCorpus,
    fixtures: Option<&FixtureTransport>,
    out_dir: &Path,
) -> Result<(EventLog, Option<String>)> {
    let config = plan.cell_config(cell);
    let mut recorder = None;
    let transport = match transport_for(plan, fixtures)? {
        Some(t) if plan.record_fixtures => {
            let shared = Arc::new(RecordingTransport::new(t));
            recorder = Some(shared.clone());
            Some(Box::new(shared) as Box<dyn ChatTransport>)
        }
        other => other,
    };
    let mut policy = build_policy(&config.policy, cell.condition, transport)?;
    let log = engine::run(&config, policy.as_mut(), population, corpus)?;
    let fixture_file = match recorder {
        Some(r) => {
            let name = format!("{}.fixtures.jsonl", cell.file_stem());
            r.save(&out_dir.join(&name))?;
            Some(name)
        }
        None => None,
    };
    Ok((log, fixture_file))
}

/// Runs every cell with inputs taken from the plan.
pub fn run_experiment(plan: &ExperimentPlan, out_dir: &Path) -> Result<Manifest> {
    plan.validate()?;
    let population = plan.load_population()?;
    let corpus = plan.load_corpus()?;
    run_experiment_with(plan, &population, &corpus, out_dir)
}

/// Runs every cell on the given shared inputs, persists one log per cell and
/// writes the manifest after all cells finish. A failed cell is recorded in
/// the manifest; the others are kept.
pub fn run_experiment_with(
    plan: &ExperimentPlan,
    population: &Population,
    corpus: &SeedCorpus,
    out_dir: &Path,
) -> Result<Manifest> {
    plan.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("create {}", out_dir.display()), e))?;
    let fixtures = match &plan.transport {
        TransportMode::Fixtures { path } if matches!(plan.run.policy, PolicySpec::Llm(_)) => {
            Some(FixtureTransport::load_path(path)?)
        }
        _ => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let cells = plan.cells();
    let entries: Vec<CellEntry> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let config = plan.cell_config(cell);
                let config_sha256 = sha256_hex(serde_json::to_vec(&config).expect("config serializes"));
                let mut entry = CellEntry {
                    run: cell.run,
                    load: cell.condition.load,
                    norm: cell.condition.norm,
                    replication: cell.replication,
                    seed: cell.seed,
                    config_sha256,
                    status: CellStatus::Failed,
                    file: None,
                    sha256: None,
                    lines: None,
                    activations: None,
                    fixtures: None,
                    error: None,
                };
                let outcome = run_cell(plan, cell, population, corpus, fixtures.as_ref(), out_dir).and_then(|(log, fx)| {
                    let name = format!("{}.jsonl", cell.file_stem());
                    let bytes = log.to_jsonl();
                    let path = out_dir.join(&name);
                    std::fs::write(&path, &bytes).map_err(|e| Error::io(format!("write {}", path.display()), e))?;
                    Ok((name, sha256_hex(&bytes), log.entries.len(), log.activations, fx))
                });
                match outcome {
                    Ok((name, digest, lines, activations, fx)) => {
                        info!("{}: {lines} log lines, {activations} activations", cell.condition);
                        entry.status = CellStatus::Ok;
                        entry.file = Some(name);
                        entry.sha256 = Some(digest);
                        entry.lines = Some(lines);
                        entry.activations = Some(activations);
                        entry.fixtures = fx;
                    }
                    Err(e) => {
                        warn!("{} failed: {e}", cell.condition);
                        entry.error = Some(e.to_string());
                    }
                }
                entry
            })
            .collect()
    });
    let manifest = Manifest {
        plan: plan.clone(),
        population_sha256: population.digest(),
        corpus_sha256: corpus.digest(),
        cells: entries,
    };
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_json()).map_err(|e| Error::io(format!("write {}", path.display()), e))?;
    Ok(manifest)
}

/// Reads one persisted cell log.
pub fn read_log(path: &Path) -> Result<EventLog> {
    EventLog::load(path)
}

/// Reads every successful cell log listed in a run directory's manifest,
/// checking each against its recorded digest.
pub fn read_logs(dir: &Path) -> Result<Vec<EventLog>> {
    let manifest = Manifest::load(dir)?;
    let mut logs = Vec::new();
    for cell in manifest.cells.iter().filter(|c| c.status == CellStatus::Ok) {
        let name = cell.file.as_deref().expect("ok cells name their log");
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        if cell.sha256.as_deref() != Some(sha256_hex(&bytes).as_str()) {
            return Err(Error::Validation(format!("{} does not match its manifest digest", path.display())));
        }
        logs.push(read_log(&path)?);
    }
    Ok(logs)
}

/// Realized algorithmic feed size per cell, over activations that produced
/// a feed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadAuditRow {
    pub load: LoadCondition,
    pub norm: NormRegime,
    pub target: usize,
    pub activations: usize,
    #[serde(with = "crate::stats::nullable_f64")]
    pub mean: f64,
    pub min: Option<usize>,
    pub max: Option<usize>,
    /// No activations were logged for this cell.
    pub flagged: bool,
}

fn by_condition<'a>(records: impl IntoIterator<Item = &'a ExposureRecord>) -> BTreeMap<Condition, Vec<&'a ExposureRecord>> {
    let mut m: BTreeMap<Condition, Vec<&ExposureRecord>> = Condition::all().map(|c| (c, Vec::new())).collect();
    for r in records {
        m.entry(r.condition).or_default().push(r);
    }
    m
}

pub fn realized_load_audit<'a>(records: impl IntoIterator<Item = &'a ExposureRecord>) -> Vec<LoadAuditRow> {
    by_condition(records)
        .into_iter()
        .map(|(condition, rows)| {
            let mut per_activation: BTreeMap<(RunId, u32, AgentId), usize> = BTreeMap::new();
            for r in rows {
                let n = per_activation.entry((r.run, r.timestep, r.agent)).or_default();
                if r.slot == FeedSlot::Algorithmic {
                    *n += 1;
                }
            }
            let counts: Vec<usize> = per_activation.into_values().collect();
            let mean = if counts.is_empty() {
                f64::NAN
            } else {
                counts.iter().sum::<usize>() as f64 / counts.len() as f64
            };
            LoadAuditRow {
                load: condition.load,
                norm: condition.norm,
                target: condition.load.algorithmic_count(),
                activations: counts.len(),
                mean,
                min: counts.iter().min().copied(),
                max: counts.iter().max().copied(),
                flagged: counts.is_empty(),
            }
        })
        .collect()
}

/// Action shares over all exposure records of a cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShareRow {
    pub load: LoadCondition,
    pub norm: NormRegime,
    pub records: usize,
    #[serde(with = "crate::stats::nullable_f64")]
    pub read: f64,
    #[serde(with = "crate::stats::nullable_f64")]
    pub like: f64,
    #[serde(with = "crate::stats::nullable_f64")]
    pub repost: f64,
    #[serde(with = "crate::stats::nullable_f64")]
    pub quote: f64,
}

impl ShareRow {
    pub fn shares(&self) -> [f64; 4] {
        [self.read, self.like, self.repost, self.quote]
    }
}

pub fn descriptive_shares<'a>(records: impl IntoIterator<Item = &'a ExposureRecord>) -> Vec<ShareRow> {
    by_condition(records)
        .into_iter()
        .map(|(condition, rows)| {
            let n = rows.len();
            let share = |a: ActionKind| {
                if n == 0 {
                    f64::NAN
                } else {
                    rows.iter().filter(|r| r.action == a).count() as f64 / n as f64
                }
            };
            ShareRow {
                load: condition.load,
                norm: condition.norm,
                records: n,
                read: share(ActionKind::Read),
                like: share(ActionKind::Like),
                repost: share(ActionKind::Repost),
                quote: share(ActionKind::Quote),
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(format!("write {}", path.display()), e))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{LlmSpec, ScriptStep};
    use crate::population::generate_population;

    fn tiny_plan() -> ExperimentPlan {
        ExperimentPlan {
            run: RunConfig { n_agents: 60, timesteps: 30, activation_p: 0.1, ..RunConfig::default() },
            workers: 3,
            ..ExperimentPlan::default()
        }
    }

    #[test]
    fn cell_seeds_distinct_and_reproducible() {
        let plan = ExperimentPlan { replications: 3, ..tiny_plan() };
        let cells = plan.cells();
        assert_eq!(cells.len(), 36);
        let mut seeds: Vec<u64> = cells.iter().map(|c| c.seed).collect();
        assert_eq!(seeds, plan.cells().iter().map(|c| c.seed).collect::<Vec<_>>());
        seeds.sort();
        seeds.dedup();
        assert_eq!(seeds.len(), 36);
        assert_ne!(cell_seed(1, cells[0].condition, 0), cell_seed(2, cells[0].condition, 0));
    }

    #[test]
    fn twelve_cells_twelve_logs_and_deterministic() {
        let plan = tiny_plan();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = run_experiment(&plan, a.path()).unwrap();
        let mb = run_experiment(&ExperimentPlan { workers: 1, ..plan.clone() }, b.path()).unwrap();
        assert_eq!(ma.failures(), 0);
        let logs: Vec<_> = std::fs::read_dir(a.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".jsonl"))
            .collect();
        assert_eq!(logs.len(), 12);
        assert_eq!(ma.cells, mb.cells);
        assert!(a.path().join(MANIFEST_FILE).exists());

        let read = read_logs(a.path()).unwrap();
        let total: usize = read.iter().map(|l| l.entries.len()).sum();
        assert_eq!(total, ma.cells.iter().map(|c| c.lines.unwrap()).sum::<usize>());
    }

    #[test]
    fn failed_cell_is_recorded_not_fatal() {
        // Missing fixtures are a plan-level error, raised before any cell runs.
        let mut plan = tiny_plan();
        plan.run.policy = PolicySpec::Llm(LlmSpec::new("http://127.0.0.1:9/v1", "m"));
        plan.transport = TransportMode::Fixtures { path: "/nonexistent/fixtures.jsonl".into() };
        let dir = tempfile::tempdir().unwrap();
        assert!(run_experiment(&plan, dir.path()).is_err());

        // Population mismatch makes every cell fail but still yields a manifest.
        let plan = tiny_plan();
        let pop = generate_population(61, 1).unwrap();
        let corpus = generate_seed_corpus(1);
        let m = run_experiment_with(&plan, &pop, &corpus, dir.path()).unwrap();
        assert_eq!(m.failures(), 12);
        assert!(m.cells.iter().all(|c| c.error.as_deref().is_some_and(|e| e.contains("agents"))));
        assert!(dir.path().join(MANIFEST_FILE).exists());
    }

    #[test]
    fn read_only_shares_and_audit() {
        let mut plan = tiny_plan();
        plan.run.policy = PolicySpec::Scripted { script: vec![ScriptStep::Read] };
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&plan, dir.path()).unwrap();
        let logs = read_logs(dir.path()).unwrap();
        let shares = descriptive_shares(logs.iter().flat_map(|l| l.exposures()));
        assert_eq!(shares.len(), 12);
        for s in &shares {
            assert_eq!(s.read, 1.0);
            assert!((s.shares().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let audit = realized_load_audit(logs.iter().flat_map(|l| l.exposures()));
        for row in &audit {
            assert!(!row.flagged);
            assert!(row.max.unwrap() <= row.target + 3);
        }
    }

    #[test]
    fn empty_cell_flagged() {
        let audit = realized_load_audit(std::iter::empty());
        assert_eq!(audit.len(), 12);
        assert!(audit.iter().all(|r| r.flagged && r.mean.is_nan()));
        let shares = descriptive_shares(std::iter::empty());
        assert!(shares.iter().all(|s| s.records == 0));
    }

    #[test]
    fn single_activation_mean_min_max_agree() {
        let c = Condition::new(LoadCondition::Low, NormRegime::LikeDominant);
        let rec = |post, slot| ExposureRecord {
            run: RunId(0),
            condition: c,
            timestep: 3,
            agent: AgentId(1),
            post: crate::model::PostId(post),
            likes_at_exposure: 0,
            reshares_at_exposure: 0,
            action: ActionKind::Read,
            slot,
        };
        let mut rows: Vec<_> = (0..3).map(|i| rec(i, FeedSlot::Followed)).collect();
        rows.extend((3..10).map(|i| rec(i, FeedSlot::Algorithmic)));
        let audit = realized_load_audit(&rows);
        let row = audit.iter().find(|r| r.load == LoadCondition::Low && r.norm == NormRegime::LikeDominant).unwrap();
        assert_eq!((row.mean, row.min, row.max), (7.0, Some(7), Some(7)));
    }

    #[test]
    fn recorded_fixtures_replay_identically() {
        let mut plan = tiny_plan();
        plan.loads = vec![LoadCondition::Low];
        plan.norms = vec![NormRegime::LikeDominant, NormRegime::NoNorm];
        plan.run.policy = PolicySpec::Llm(LlmSpec::new("http://unused.invalid/v1", "m"));
        plan.record_fixtures = true;
        let rec = tempfile::tempdir().unwrap();
        let recorded = run_experiment(&plan, rec.path()).unwrap();
        assert_eq!(recorded.failures(), 0);

        let fx = tempfile::tempdir().unwrap();
        for c in &recorded.cells {
            let name = c.fixtures.as_ref().unwrap();
            std::fs::copy(rec.path().join(name), fx.path().join(name)).unwrap();
        }
        plan.record_fixtures = false;
        plan.transport = TransportMode::Fixtures { path: fx.path().to_path_buf() };
        let out = tempfile::tempdir().unwrap();
        let replayed = run_experiment(&plan, out.path()).unwrap();
        let digests = |m: &Manifest| m.cells.iter().map(|c| c.sha256.clone()).collect::<Vec<_>>();
        assert_eq!(digests(&recorded), digests(&replayed));
    }
}
