//! HTTP API over one loaded model.
//!
//! Handlers share one immutable model behind an `Arc`; a reload builds the new
//! model completely and then swaps the pointer, so a request sees either the
//! old model or the new one. Decision journal appends go through one mutex
//! guarded writer.
//!
//! | method | path                   | body                           |
//! |--------|------------------------|--------------------------------|
//! | GET    | `/api/v1/ranking?date=`| ranked vehicles for a log day  |
//! | POST   | `/api/v1/score`        | `{state}`                      |
//! | POST   | `/api/v1/whatif`       | `{state, add[], remove[]}`     |
//! | POST   | `/api/v1/decisions`    | `{date, vehicle_id, decision}` |
//! | GET    | `/api/v1/model/meta`   | config and provenance          |
//! | POST   | `/api/v1/model/reload` | re-read the model file         |
//! | GET    | `/api/v1/report?theta=`| per-day cost comparison        |
//!
//! Errors are `{"error": {"code": .., "message": ..}}` with stable codes.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use rollaid::persist::{MODEL_FORMAT, MODEL_VERSION};
use rollaid::{
    compare_policies, rank_fleet, rollouts_on, score_state, whatif, CostTable, DefectState,
    EvalConfig, FleetSnapshot, IsrModel, ModelConfig, Provenance, ScoreResult, TransactionLog,
    WhatIfRequest,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::files;

// ── Payloads ────────────────────────────────────────────────────────────

/// A score as exact supports plus the display string clients must show verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreView {
    pub numerator: u64,
    pub denominator: u64,
    pub infinite: bool,
    pub display: String,
    pub witness: Option<DefectState>,
}

impl From<&ScoreResult> for ScoreView {
    fn from(r: &ScoreResult) -> Self {
        ScoreView {
            numerator: r.score.numerator(),
            denominator: r.score.denominator(),
            infinite: r.score.is_infinite(),
            display: r.score.to_string(),
            witness: r.witness.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RankedView {
    pub rank: usize,
    pub vehicle_id: String,
    pub state: DefectState,
    pub score: ScoreView,
    /// Additive repair cost of the state, when a cost table is loaded and covers it.
    pub repair_cost: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RankingResponse {
    pub date: NaiveDate,
    /// Supervisor roll-out count that day, from the loaded log.
    pub n_rollouts: usize,
    pub vehicles: Vec<RankedView>,
}

#[derive(Debug, Deserialize)]
pub struct ScoreRequest {
    pub state: DefectState,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WhatIfResponse {
    pub state_after: DefectState,
    pub before: ScoreView,
    pub after: ScoreView,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    RollOut,
    Hold,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DecisionRequest {
    pub date: NaiveDate,
    pub vehicle_id: String,
    pub decision: Decision,
}

/// One journal line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalRecord {
    pub sequence: u64,
    pub date: NaiveDate,
    pub vehicle_id: String,
    pub decision: Decision,
    /// Score of the vehicle's logged state that day under the serving model, if known.
    pub score_shown: Option<ScoreView>,
    pub training_log_digest: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DecisionAck {
    pub accepted: bool,
    pub record: JournalRecord,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelMeta {
    pub format: String,
    pub version: u32,
    pub n_entries: usize,
    pub config: ModelConfig,
    pub provenance: Provenance,
}

impl From<&IsrModel> for ModelMeta {
    fn from(m: &IsrModel) -> Self {
        ModelMeta {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            n_entries: m.len(),
            config: m.config,
            provenance: m.provenance.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct RankingQuery {
    pub date: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct ReportQuery {
    pub theta: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportDay {
    pub date: NaiveDate,
    pub n_rollouts: u64,
    pub supervisor_cost: f64,
    pub supaid_cost: f64,
    pub delta: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportResponse {
    pub theta: u32,
    pub supervisor_total: f64,
    pub supaid_total: f64,
    pub savings_pct: f64,
    pub censored_supervisor: u64,
    pub censored_supaid: u64,
    pub days: Vec<ReportDay>,
}

// ── Errors ──────────────────────────────────────────────────────────────

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }
}

impl From<rollaid::Error> for ApiError {
    fn from(e: rollaid::Error) -> Self {
        let status = if e.is_io() {
            StatusCode::INTERNAL_SERVER_ERROR
        } else {
            StatusCode::UNPROCESSABLE_ENTITY
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<CliError> for ApiError {
    fn from(e: CliError) -> Self {
        let status = if e.exit_code() == crate::EXIT_IO {
            StatusCode::INTERNAL_SERVER_ERROR
        } else {
            StatusCode::UNPROCESSABLE_ENTITY
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn parse_date(text: &str) -> Result<NaiveDate, ApiError> {
    text.parse()
        .map_err(|_| ApiError::bad_request(format!("invalid date {text:?}, expected YYYY-MM-DD")))
}

// ── State ───────────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub model_path: PathBuf,
    pub costs_path: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
    pub journal_path: PathBuf,
}

struct Journal {
    file: File,
    next_sequence: u64,
}

struct Inner {
    model_path: PathBuf,
    model: RwLock<Arc<IsrModel>>,
    log: Option<TransactionLog>,
    costs: Option<CostTable>,
    journal: Mutex<Journal>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn load(cfg: ServeConfig) -> CliResult<Self> {
        let model = files::read_model(&cfg.model_path)?;
        let log = cfg.log_path.as_deref().map(files::read_log).transpose()?;
        let costs = cfg
            .costs_path
            .as_deref()
            .map(files::read_costs)
            .transpose()?;

        let next_sequence = match File::open(&cfg.journal_path) {
            Ok(f) => BufReader::new(f).lines().count() as u64,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => 0,
            Err(source) => {
                return Err(CliError::File {
                    path: cfg.journal_path,
                    source,
                })
            }
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&cfg.journal_path)
            .map_err(|source| CliError::File {
                path: cfg.journal_path.clone(),
                source,
            })?;

        Ok(AppState(Arc::new(Inner {
            model_path: cfg.model_path,
            model: RwLock::new(Arc::new(model)),
            log,
            costs,
            journal: Mutex::new(Journal {
                file,
                next_sequence,
            }),
        })))
    }

    /// The model currently served; callers keep it for the whole request.
    pub fn model(&self) -> Arc<IsrModel> {
        let guard = self.0.model.read().unwrap_or_else(|p| p.into_inner());
        Arc::clone(&guard)
    }

    /// Loads the model file fully, then swaps it in. On error the old model stays.
    pub fn reload(&self) -> CliResult<Arc<IsrModel>> {
        let fresh = Arc::new(files::read_model(&self.0.model_path)?);
        let mut guard = self.0.model.write().unwrap_or_else(|p| p.into_inner());
        *guard = Arc::clone(&fresh);
        Ok(fresh)
    }

    fn log(&self) -> Result<&TransactionLog, ApiError> {
        self.0.log.as_ref().ok_or_else(|| {
            ApiError::new(
                StatusCode::CONFLICT,
                "log_not_loaded",
                "the service was started without --log",
            )
        })
    }

    fn append_journal(&self, req: DecisionRequest) -> Result<JournalRecord, ApiError> {
        let model = self.model();
        let score_shown = self.0.log.as_ref().and_then(|log| {
            log.position(&req.vehicle_id, req.date)
                .map(|i| ScoreView::from(&score_state(&model, &log.rows()[i].state)))
        });
        let mut journal = self.0.journal.lock().unwrap_or_else(|p| p.into_inner());
        let record = JournalRecord {
            sequence: journal.next_sequence,
            date: req.date,
            vehicle_id: req.vehicle_id,
            decision: req.decision,
            score_shown,
            training_log_digest: model.provenance.log_digest.clone(),
        };
        let mut line = serde_json::to_string(&record).map_err(rollaid::Error::from)?;
        line.push('\n');
        let write = journal
            .file
            .write_all(line.as_bytes())
            .and_then(|()| journal.file.sync_data());
        write.map_err(|e| ApiError::from(rollaid::Error::from(e)))?;
        journal.next_sequence += 1;
        Ok(record)
    }
}

// ── Handlers ────────────────────────────────────────────────────────────

async fn ranking(
    State(app): State<AppState>,
    Query(q): Query<RankingQuery>,
) -> ApiResult<RankingResponse> {
    let log = app.log()?;
    let date = match q.date.as_deref() {
        Some(text) => parse_date(text)?,
        None => log.date_range().map(|(_, last)| last).ok_or_else(|| {
            ApiError::new(StatusCode::NOT_FOUND, "empty_log", "the log has no rows")
        })?,
    };
    let model = app.model();
    let snapshot = FleetSnapshot::from_log_day(log, date);
    let ranking = rank_fleet(&model, &snapshot);
    let vehicles = ranking
        .ordered
        .iter()
        .enumerate()
        .map(|(i, v)| RankedView {
            rank: i + 1,
            vehicle_id: v.vehicle_id.clone(),
            state: v.state.clone(),
            score: ScoreView::from(&v.result),
            repair_cost: app
                .0
                .costs
                .as_ref()
                .and_then(|c| c.state_repair_cost(&v.state).ok()),
        })
        .collect();
    Ok(Json(RankingResponse {
        date,
        n_rollouts: rollouts_on(log, date),
        vehicles,
    }))
}

async fn score(State(app): State<AppState>, body: Bytes) -> ApiResult<ScoreView> {
    let req: ScoreRequest = parse_body(&body)?;
    Ok(Json(ScoreView::from(&score_state(
        &app.model(),
        &req.state,
    ))))
}

async fn what_if(State(app): State<AppState>, body: Bytes) -> ApiResult<WhatIfResponse> {
    let req: WhatIfRequest = parse_body(&body)?;
    let r = whatif(&app.model(), &req);
    Ok(Json(WhatIfResponse {
        state_after: r.state_after,
        before: ScoreView::from(&r.before),
        after: ScoreView::from(&r.after),
    }))
}

async fn decisions(State(app): State<AppState>, body: Bytes) -> ApiResult<DecisionAck> {
    let req: DecisionRequest = parse_body(&body)?;
    if req.vehicle_id.trim().is_empty() {
        return Err(ApiError::bad_request("vehicle_id must not be empty"));
    }
    let record = app.append_journal(req)?;
    Ok(Json(DecisionAck {
        accepted: true,
        record,
    }))
}

async fn model_meta(State(app): State<AppState>) -> Json<ModelMeta> {
    Json(ModelMeta::from(app.model().as_ref()))
}

async fn model_reload(State(app): State<AppState>) -> ApiResult<ModelMeta> {
    let fresh = app.reload()?;
    log::info!("model reloaded: {} entries", fresh.len());
    Ok(Json(ModelMeta::from(fresh.as_ref())))
}

async fn report(
    State(app): State<AppState>,
    Query(q): Query<ReportQuery>,
) -> ApiResult<ReportResponse> {
    let log = app.log()?;
    let costs = app.0.costs.as_ref().ok_or_else(|| {
        ApiError::new(
            StatusCode::CONFLICT,
            "costs_not_loaded",
            "the service was started without --costs",
        )
    })?;
    let theta = match q.theta.as_deref() {
        Some(t) => t
            .parse()
            .map_err(|_| ApiError::bad_request(format!("invalid theta {t:?}")))?,
        None => 3,
    };
    let cmp = compare_policies(log, &app.model(), costs, &EvalConfig::new(theta)?)?;
    Ok(Json(ReportResponse {
        theta,
        supervisor_total: cmp.supervisor_total,
        supaid_total: cmp.supaid_total,
        savings_pct: cmp.savings_pct(),
        censored_supervisor: cmp.censored_supervisor,
        censored_supaid: cmp.censored_supaid,
        days: cmp
            .days
            .iter()
            .map(|d| ReportDay {
                date: d.date,
                n_rollouts: d.n_rollouts,
                supervisor_cost: d.supervisor_cost,
                supaid_cost: d.supaid_cost,
                delta: d.delta(),
            })
            .collect(),
    }))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/v1/ranking", get(ranking))
        .route("/api/v1/score", post(score))
        .route("/api/v1/whatif", post(what_if))
        .route("/api/v1/decisions", post(decisions))
        .route("/api/v1/model/meta", get(model_meta))
        .route("/api/v1/model/reload", post(model_reload))
        .route("/api/v1/report", get(report))
        .fallback(not_found)
        .with_state(state)
}
