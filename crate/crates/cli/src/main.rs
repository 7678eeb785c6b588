mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use socialsim_core::engine::EventLog;
use socialsim_core::harness::{
    descriptive_shares, read_logs, realized_load_audit, run_experiment, write_csv, ExperimentPlan, TransportMode,
};
use socialsim_core::model::{Condition, ExposureRecord};
use socialsim_core::policy::PolicySpec;
use socialsim_core::population::{
    generate_population_with, generate_seed_corpus, save_corpus, save_population, NetworkParams,
};
use socialsim_core::stats::{
    build_design_matrix, default_grid, fit_binary_logistic, fit_multinomial_logistic, predicted_probabilities,
    read_scenario_grid, DesignSpec, FitOptions, FittedModel, Prediction,
};
use socialsim_core::Error as CoreError;

#[derive(Parser)]
#[command(name = "socialsim", version, about = "Simulate, analyze and report feed-engagement experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic population (profiles + follow graph) as JSONL.
    GenPopulation {
        #[arg(long, default_value_t = 558)]
        agents: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        influencers: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the 50-post seed corpus as JSONL.
    GenCorpus {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the experiment plan, or a single cell of it.
    Simulate {
        /// Experiment plan (JSON). Defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Run only one cell, e.g. `load=high,norm=repost`.
        #[arg(long)]
        cell: Option<Condition>,
        #[arg(long, value_enum, default_value_t = PolicyChoice::Config)]
        policy: PolicyChoice,
        #[arg(long, value_enum)]
        transport: Option<TransportChoice>,
        /// Fixture file or directory for `--transport fixtures`.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Save every model exchange as per-cell fixture files.
        #[arg(long)]
        record_fixtures: bool,
        /// Overrides the plan's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Fit the threshold and allocation models to a run directory's logs.
    Analyze {
        /// Directory written by `simulate`.
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = StageChoice::Both)]
        stage: StageChoice,
        /// Scenario grid CSV (composite,load,norm). Defaults to 0..5 by 0.25 in every cell.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// L2 penalty on non-intercept coefficients.
        #[arg(long, default_value_t = 0.0)]
        l2: f64,
    },
    /// Render figures and a Markdown report from `analyze` outputs.
    Report {
        #[arg(long)]
        analysis: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyChoice {
    /// Parametric policy with the published coefficient tables.
    Mock,
    ReadOnly,
    /// Whatever the plan specifies.
    Config,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportChoice {
    Mock,
    Fixtures,
    Live,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StageChoice {
    Threshold,
    Allocation,
    Both,
}

/// An error plus the exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: error.into() }
}

fn runtime(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: error.into() }
}

/// Configuration and input-format problems are usage errors; the rest are
/// runtime failures.
fn classify(e: CoreError) -> Failure {
    match e {
        CoreError::Config(_) | CoreError::Parse { .. } => usage(e),
        other => runtime(other),
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenPopulation { agents, seed, influencers, out } => gen_population(agents, seed, influencers, &out),
        Command::GenCorpus { seed, out } => gen_corpus(seed, &out),
        Command::Simulate { config, out, cell, policy, transport, fixtures, record_fixtures, seed, workers } => {
            simulate(SimulateArgs { config, out, cell, policy, transport, fixtures, record_fixtures, seed, workers })
        }
        Command::Analyze { logs, out, stage, grid, l2 } => analyze(&logs, &out, stage, grid.as_deref(), l2),
        Command::Report { analysis, out } => report::run(&analysis, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn gen_population(agents: usize, seed: u64, influencers: usize, out: &Path) -> CmdResult {
    let params = NetworkParams { influencers, ..NetworkParams::default() };
    let pop = generate_population_with(agents, seed, &params).map_err(classify)?;
    save_population(&pop, out).map_err(classify)?;
    info!("wrote {} agents, {} follow edges to {}", pop.len(), pop.graph.edge_count(), out.display());
    Ok(())
}

fn gen_corpus(seed: u64, out: &Path) -> CmdResult {
    let corpus = generate_seed_corpus(seed);
    save_corpus(&corpus, out).map_err(classify)?;
    info!("wrote {} seed posts to {}", corpus.len(), out.display());
    Ok(())
}

struct SimulateArgs {
    config: Option<PathBuf>,
    out: PathBuf,
    cell: Option<Condition>,
    policy: PolicyChoice,
    transport: Option<TransportChoice>,
    fixtures: Option<PathBuf>,
    record_fixtures: bool,
    seed: Option<u64>,
    workers: Option<usize>,
}

fn simulate(args: SimulateArgs) -> CmdResult {
    let mut plan = match &args.config {
        Some(path) => {
            if !path.exists() {
                return Err(usage(anyhow!("config file {} does not exist", path.display())));
            }
            ExperimentPlan::load(path).map_err(|e| usage(anyhow!(e)))?
        }
        None => ExperimentPlan::default(),
    };
    if let Some(c) = args.cell {
        plan.loads = vec![c.load];
        plan.norms = vec![c.norm];
    }
    match args.policy {
        PolicyChoice::Mock => plan.run.policy = PolicySpec::mock(),
        PolicyChoice::ReadOnly => plan.run.policy = PolicySpec::read_only(),
        PolicyChoice::Config => {}
    }
    match args.transport {
        Some(TransportChoice::Mock) => plan.transport = TransportMode::Mock,
        Some(TransportChoice::Live) => plan.transport = TransportMode::Live,
        Some(TransportChoice::Fixtures) => {
            let path = args.fixtures.clone().ok_or_else(|| usage(anyhow!("--transport fixtures needs --fixtures")))?;
            plan.transport = TransportMode::Fixtures { path };
        }
        None => {
            if let Some(path) = args.fixtures.clone() {
                plan.transport = TransportMode::Fixtures { path };
            }
        }
    }
    if args.record_fixtures {
        plan.record_fixtures = true;
    }
    if let Some(seed) = args.seed {
        plan.base_seed = seed;
    }
    if let Some(w) = args.workers {
        plan.workers = w;
    }
    if plan.transport == TransportMode::Live && !matches!(plan.run.policy, PolicySpec::Llm(_)) {
        return Err(usage(anyhow!("live transport needs an llm policy with an endpoint in the config")));
    }
    plan.validate().map_err(classify)?;

    let manifest = run_experiment(&plan, &args.out).map_err(classify)?;
    let failed = manifest.failures();
    info!("{} cells run, {failed} failed; manifest in {}", manifest.cells.len(), args.out.display());
    if failed > 0 {
        return Err(runtime(anyhow!("{failed} of {} cells failed; see the manifest", manifest.cells.len())));
    }
    Ok(())
}

/// One row of a predictions CSV.
#[derive(Serialize, Deserialize)]
pub(crate) struct PredictionRow {
    pub composite: f64,
    pub load: String,
    pub norm: String,
    pub outcome: String,
    pub p: f64,
    pub lower: f64,
    pub upper: f64,
    pub flagged: bool,
}

fn prediction_rows(preds: &[Prediction]) -> Vec<PredictionRow> {
    preds
        .iter()
        .flat_map(|pr| {
            pr.outcomes.iter().map(move |o| PredictionRow {
                composite: pr.scenario.composite,
                load: pr.scenario.load.to_string(),
                norm: pr.scenario.norm.to_string(),
                outcome: o.outcome.clone(),
                p: o.p,
                lower: o.lower,
                upper: o.upper,
                flagged: pr.flagged,
            })
        })
        .collect()
}

/// Fit statistics for one stage, as written to `fit_metrics.json`.
#[derive(Serialize, Deserialize)]
pub(crate) struct StageSummary {
    pub n_obs: usize,
    pub ll_full: f64,
    pub ll_null: f64,
    pub k: usize,
    pub k_null: usize,
    pub lr_chi2: f64,
    pub df: usize,
    pub mcfadden_r2: f64,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub diagnostics: Vec<String>,
}

impl StageSummary {
    fn new(m: &FittedModel) -> Self {
        let metrics = m.metrics();
        StageSummary {
            n_obs: m.n_obs,
            ll_full: m.ll_full,
            ll_null: m.ll_null,
            k: m.k,
            k_null: m.k_null,
            lr_chi2: metrics.lr_chi2,
            df: metrics.df,
            mcfadden_r2: metrics.mcfadden_r2,
            aic: metrics.aic,
            converged: m.converged,
            iterations: m.iterations,
            diagnostics: m.diagnostics.clone(),
        }
    }
}

fn fit_stage(
    records: &[&ExposureRecord],
    spec: DesignSpec,
    opts: &FitOptions,
    grid: &[socialsim_core::stats::Scenario],
    out: &Path,
) -> anyhow::Result<StageSummary> {
    let name = spec.stage.as_str();
    let (x, y) = build_design_matrix(records.iter().copied(), spec)?;
    info!("{name}: fitting {} rows x {} columns", x.nrows(), x.ncols());
    let model = match spec.stage {
        socialsim_core::stats::Stage::Threshold => fit_binary_logistic(&x, &y, opts)?,
        socialsim_core::stats::Stage::Allocation => fit_multinomial_logistic(&x, &y, opts)?,
    };
    for d in &model.diagnostics {
        warn!("{name}: {d}");
    }
    model.write_coefficients_csv(&out.join(format!("{name}_coefficients.csv")))?;
    model.write_json(&out.join(format!("{name}_model.json")))?;
    let preds = predicted_probabilities(&model, grid)?;
    write_csv(&prediction_rows(&preds), &out.join(format!("{name}_predictions.csv")))?;
    Ok(StageSummary::new(&model))
}

fn analyze(logs_dir: &Path, out: &Path, stage: StageChoice, grid: Option<&Path>, l2: f64) -> CmdResult {
    if !logs_dir.is_dir() {
        return Err(runtime(anyhow!("log directory {} does not exist", logs_dir.display())));
    }
    let grid = match grid {
        Some(p) => read_scenario_grid(p).map_err(|e| usage(anyhow!(e)))?,
        None => default_grid(),
    };
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(usage(anyhow!("--l2 must be a non-negative number")));
    }
    let logs: Vec<EventLog> = read_logs(logs_dir).map_err(runtime)?;
    let records: Vec<&ExposureRecord> = logs.iter().flat_map(|l| l.exposures()).collect();
    if records.is_empty() {
        return Err(runtime(anyhow!("no exposure records under {}", logs_dir.display())));
    }
    std::fs::create_dir_all(out).with_context(|| format!("create {}", out.display())).map_err(runtime)?;

    write_csv(&descriptive_shares(records.iter().copied()), &out.join("descriptive_shares.csv")).map_err(runtime)?;
    write_csv(&realized_load_audit(records.iter().copied()), &out.join("load_audit.csv")).map_err(runtime)?;

    let opts = FitOptions { l2, ..FitOptions::default() };
    let mut summary = BTreeMap::new();
    if stage != StageChoice::Allocation {
        let s = fit_stage(&records, DesignSpec::threshold(), &opts, &grid, out).map_err(runtime)?;
        summary.insert("threshold", s);
    }
    if stage != StageChoice::Threshold {
        match fit_stage(&records, DesignSpec::allocation(), &opts, &grid, out) {
            Ok(s) => {
                summary.insert("allocation", s);
            }
            Err(e) if stage == StageChoice::Both => warn!("allocation model skipped: {e:#}"),
            Err(e) => return Err(runtime(e)),
        }
    }
    let path = out.join("fit_metrics.json");
    let json = serde_json::to_string_pretty(&summary).map_err(runtime)?;
    std::fs::write(&path, json).with_context(|| format!("write {}", path.display())).map_err(runtime)?;
    info!("analysis written to {}", out.display());
    Ok(())
}

/// Reads an analysis file, failing with its name when absent.
pub(crate) fn require(dir: &Path, name: &str) -> anyhow::Result<PathBuf> {
    let p = dir.join(name);
    if !p.exists() {
        bail!("missing analysis file {}", p.display());
    }
    Ok(p)
}
