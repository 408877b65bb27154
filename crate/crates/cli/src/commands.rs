//! Subcommands: generate, train, score, rank, evaluate and serve.

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rollaid::datagen::{generate, write_ground_truth, GenConfig};
use rollaid::evaluator::{write_delta_series, write_report, write_summary};
use rollaid::{
    compare_policies, rank_fleet, save_model, score_state, select_top_n, train, write_costs,
    write_ranking, write_snapshot, write_transactions, Aggregation, DefectState, EvalConfig,
    FleetSnapshot, MinerConfig, PreprocessConfig, Ranking, Smoothing,
};

use crate::error::{CliError, CliResult};
use crate::files;
use crate::service::{self, ScoreView, ServeConfig};

#[derive(Debug, Parser)]
#[command(
    name = "rollaid",
    version,
    about = "Roll-out decision aid for fleet supervisors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a fleet and write its log, cost table, snapshot and ground truth.
    Generate(GenerateArgs),
    /// Mine a model from a transaction log.
    Train(TrainArgs),
    /// Score one defect state.
    Score(ScoreArgs),
    /// Rank a fleet snapshot, most roll-out suitable first.
    Rank(RankArgs),
    /// Replay the supervisor's decisions against the model's selections.
    Evaluate(EvaluateArgs),
    /// Serve the HTTP API over a loaded model.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generator configuration (TOML, or JSON by `.json` extension); defaults apply to omitted fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub log: PathBuf,
    /// Down-fraction at or above which a defect state counts as bad.
    #[arg(long, default_value_t = 0.85)]
    pub delta: f64,
    /// Minimum support K; required so experiments never drift on a default.
    #[arg(long)]
    pub min_support: u64,
    #[arg(long)]
    pub max_itemset_size: Option<usize>,
    /// Use (beta + 1) / (alpha + 1) ratios.
    #[arg(long)]
    pub laplace: bool,
    /// Only rows on or before this date are used.
    #[arg(long)]
    pub until: Option<NaiveDate>,
    #[arg(long)]
    pub out_model: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Semicolon-separated defect ids, e.g. "d1;d2".
    #[arg(long, allow_hyphen_values = true)]
    pub state: String,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// `vehicle_id,defect_state` CSV.
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Keep only the first N vehicles (clamped to the fleet size).
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Write the ranking CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AggregationArg {
    Mean,
    Sum,
}

impl From<AggregationArg> for Aggregation {
    fn from(a: AggregationArg) -> Self {
        match a {
            AggregationArg::Mean => Aggregation::Mean,
            AggregationArg::Sum => Aggregation::Sum,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub costs: PathBuf,
    /// Look-ahead in observations; repeat for several (default 3 and 4).
    #[arg(long = "theta", default_values_t = [3u32, 4])]
    pub thetas: Vec<u32>,
    #[arg(long, value_enum, default_value = "mean")]
    pub aggregation: AggregationArg,
    /// First evaluated day; defaults to the day after the model's training window.
    #[arg(long)]
    pub test_from: Option<NaiveDate>,
    #[arg(long)]
    pub test_until: Option<NaiveDate>,
    /// Directory for per-theta reports, delta series and the summary.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub costs: Option<PathBuf>,
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Append-only decisions journal (JSON lines).
    #[arg(long, default_value = "decisions.jsonl")]
    pub journal: PathBuf,
}

pub fn run(command: Command, out: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Generate(a) => run_generate(&a, out),
        Command::Train(a) => run_train(&a, out),
        Command::Score(a) => run_score(&a, out),
        Command::Rank(a) => run_rank(&a, out),
        Command::Evaluate(a) => run_evaluate(&a, out),
        Command::Serve(a) => run_serve(a),
    }
}

// ── generate ────────────────────────────────────────────────────────────

fn read_gen_config(path: &Path) -> CliResult<GenConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::File {
        path: path.to_owned(),
        source,
    })?;
    let bad = |message: String| CliError::ConfigFile {
        path: path.to_owned(),
        message,
    };
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| bad(e.to_string()))
    }
}

fn run_generate(a: &GenerateArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut cfg = match &a.config {
        Some(p) => read_gen_config(p)?,
        None => GenConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let syn = generate(&cfg)?;
    files::create_dir(&a.out_dir)?;

    let train_end = cfg.train_end();
    let train_log = syn.log.filter_dates(|d| d <= train_end);
    let snapshot = match syn.log.date_range() {
        Some((_, last)) => FleetSnapshot::from_log_day(&syn.log, last),
        None => FleetSnapshot::new(None),
    };

    let dir = &a.out_dir;
    files::write_atomic(&dir.join("log.csv"), |w| write_transactions(&syn.log, w))?;
    files::write_atomic(&dir.join("train_log.csv"), |w| {
        write_transactions(&train_log, w)
    })?;
    files::write_atomic(&dir.join("costs.csv"), |w| write_costs(&syn.costs, w))?;
    files::write_atomic(&dir.join("snapshot.csv"), |w| write_snapshot(&snapshot, w))?;
    files::write_atomic(&dir.join("ground_truth.json"), |w| {
        write_ground_truth(&syn.truth, w)
    })?;
    writeln!(
        out,
        "generated {} rows for {} vehicles (seed {}, training through {train_end}) in {}",
        syn.log.len(),
        syn.log.vehicle_count(),
        cfg.seed,
        dir.display()
    )?;
    Ok(())
}

// ── train ───────────────────────────────────────────────────────────────

fn run_train(a: &TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let pre = PreprocessConfig::new(a.delta)?;
    let miner = MinerConfig {
        min_support: a.min_support,
        max_itemset_size: a.max_itemset_size,
        smoothing: if a.laplace {
            Smoothing::Laplace
        } else {
            Smoothing::None
        },
    };
    miner.validate()?;
    let mut log = files::read_log(&a.log)?;
    if let Some(until) = a.until {
        log = log.filter_dates(|d| d <= until);
    }
    let model = train(&log, &pre, &miner)?;
    files::write_atomic(&a.out_model, |w| save_model(&model, w))?;
    writeln!(
        out,
        "trained {} itemsets from {} rows ({} beta, {} alpha) into {}",
        model.len(),
        model.provenance.n_rows,
        model.provenance.n_beta,
        model.provenance.n_alpha,
        a.out_model.display()
    )?;
    Ok(())
}

// ── score / rank ────────────────────────────────────────────────────────

fn run_score(a: &ScoreArgs, out: &mut dyn Write) -> CliResult<()> {
    let model = files::read_model(&a.model)?;
    let state = DefectState::parse(&a.state)?;
    let view = ScoreView::from(&score_state(&model, &state));
    serde_json::to_writer(&mut *out, &view).map_err(rollaid::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn run_rank(a: &RankArgs, out: &mut dyn Write) -> CliResult<()> {
    let model = files::read_model(&a.model)?;
    let snapshot = files::read_snapshot(&a.snapshot)?;
    let mut ranking = rank_fleet(&model, &snapshot);
    if let Some(n) = a.top_n {
        let keep = select_top_n(&ranking, n).len();
        ranking = Ranking {
            ordered: ranking.ordered.into_iter().take(keep).collect(),
        };
    }
    match &a.out {
        Some(path) => files::write_atomic(path, |w| write_ranking(&ranking, w)),
        None => Ok(write_ranking(&ranking, out)?),
    }
}

// ── evaluate ────────────────────────────────────────────────────────────

fn run_evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> CliResult<()> {
    let log = files::read_log(&a.log)?;
    let model = files::read_model(&a.model)?;
    let costs = files::read_costs(&a.costs)?;
    files::create_dir(&a.report)?;

    let mut thetas = a.thetas.clone();
    thetas.sort_unstable();
    thetas.dedup();
    let mut comparisons = Vec::with_capacity(thetas.len());
    for theta in thetas {
        let cfg = EvalConfig {
            theta,
            aggregation: a.aggregation.into(),
            test_start: a.test_from,
            test_end: a.test_until,
        };
        let cmp = compare_policies(&log, &model, &costs, &cfg)?;
        files::write_atomic(&a.report.join(format!("report_theta{theta}.csv")), |w| {
            write_report(&cmp, w)
        })?;
        files::write_atomic(&a.report.join(format!("deltas_theta{theta}.csv")), |w| {
            write_delta_series(&cmp, w)
        })?;
        comparisons.push(cmp);
    }
    files::write_atomic(&a.report.join("summary.csv"), |w| {
        write_summary(&comparisons, w)
    })?;
    write_summary(&comparisons, &mut *out)?;
    Ok(())
}

// ── serve ───────────────────────────────────────────────────────────────

fn run_serve(a: ServeArgs) -> CliResult<()> {
    let cfg = ServeConfig {
        model_path: a.model,
        costs_path: a.costs,
        log_path: a.log,
        journal_path: a.journal,
    };
    let state = service::AppState::load(cfg)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port)).await?;
        log::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, service::router(state)).await
    })?;
    Ok(())
}
