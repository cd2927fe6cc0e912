//! HTTP/JSON front end for the engine, the decision support loop and the
//! document repository.
//!
//! Simulations run synchronously; analyses run as jobs polled through
//! `/jobs/{id}`. Both go through a bounded pool of blocking workers. The
//! repository sits behind a lock that admits a single writer.

mod error;
pub mod jobs;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::sync::Semaphore;

use hpn_core::document::{from_json, net_from_json, scenario_from_json, to_json};
use hpn_core::dss::{self, AnalysisRequest, ExplorationMode};
use hpn_core::repository::{DocumentKind, RepoError, Repository};
use hpn_core::{compose, simulate, Fusion, HybridNet, Id, ScenarioConfig};

pub use error::ApiError;
use jobs::{JobState, Jobs};

type ApiResult<T> = Result<T, ApiError>;

pub struct AppState {
    repo: RwLock<Repository>,
    jobs: Jobs,
    workers: Arc<Semaphore>,
}

impl AppState {
    pub fn new(repo: Repository, workers: usize) -> Arc<Self> {
        Arc::new(AppState {
            repo: RwLock::new(repo),
            jobs: Jobs::default(),
            workers: Arc::new(Semaphore::new(workers.max(1))),
        })
    }

    fn read<T>(&self, f: impl FnOnce(&Repository) -> Result<T, RepoError>) -> ApiResult<T> {
        Ok(f(&self.repo.read().unwrap())?)
    }

    fn write<T>(&self, f: impl FnOnce(&mut Repository) -> Result<T, RepoError>) -> ApiResult<T> {
        Ok(f(&mut self.repo.write().unwrap())?)
    }

    /// Runs `work` on a blocking thread once a worker slot is free.
    async fn on_worker<T: Send + 'static>(&self, work: impl FnOnce() -> T + Send + 'static) -> T {
        let _permit = self.workers.clone().acquire_owned().await.expect("pool is never closed");
        tokio::task::spawn_blocking(work).await.expect("worker panicked")
    }
}

/// Listen address and repository location.
#[derive(Clone, Debug)]
pub struct Config {
    pub addr: SocketAddr,
    pub repo: PathBuf,
    pub workers: usize,
}

impl Config {
    /// Reads `HPNDSS_ADDR` and `HPNDSS_REPO`, falling back to
    /// `127.0.0.1:8080` and `./hpndss-repo`.
    pub fn from_env() -> Result<Self, String> {
        let addr = std::env::var("HPNDSS_ADDR").unwrap_or_else(|_| "127.0.0.1:8080".into());
        let addr = addr.parse().map_err(|e| format!("HPNDSS_ADDR `{addr}`: {e}"))?;
        let repo = std::env::var_os("HPNDSS_REPO").map_or_else(|| PathBuf::from("hpndss-repo"), PathBuf::from);
        let workers = std::thread::available_parallelism().map_or(2, |n| n.get());
        Ok(Config { addr, repo, workers })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/models", post(post_model).get(list_models))
        .route("/models/{id}", get(get_model).delete(delete_model))
        .route("/scenarios", post(post_scenario).get(list_scenarios))
        .route("/scenarios/{id}", get(get_scenario).delete(delete_scenario))
        .route("/compose", post(post_compose))
        .route("/simulate", post(post_simulate))
        .route("/analyze", post(post_analyze))
        .route("/jobs/{id}", get(get_job))
        .route("/reports/{id}", get(get_report))
        .route("/history", get(get_history))
        .route("/compare", get(get_compare))
        .route("/traces/{file}", get(get_trace))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(config: Config) -> std::io::Result<()> {
    let repo = Repository::open(&config.repo).map_err(std::io::Error::other)?;
    let app = router(AppState::new(repo, config.workers));
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    axum::serve(listener, app).await
}

fn json_text(status: StatusCode, text: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], text).into_response()
}

fn text(body: &Bytes) -> ApiResult<&str> {
    std::str::from_utf8(body).map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "Schema", "body is not UTF-8"))
}

async fn post_model(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let net = net_from_json(text(&body)?)?;
    let entry = state.write(|r| r.put_model(&net, &[]))?;
    Ok((StatusCode::CREATED, Json(entry)).into_response())
}

async fn list_models(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    Ok(Json(state.read(|r| Ok(r.list(DocumentKind::Model)))?).into_response())
}

async fn get_model(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let net = state.read(|r| r.get_model(&Id::new(id)))?;
    Ok(json_text(StatusCode::OK, hpn_core::document::net_to_json(&net)))
}

async fn delete_model(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    state.write(|r| r.delete(DocumentKind::Model, &Id::new(id)))?;
    Ok(StatusCode::NO_CONTENT)
}

async fn post_scenario(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let scenario = scenario_from_json(text(&body)?)?;
    // Checked against its net when that net is stored; otherwise at run time.
    if let Ok(net) = state.read(|r| r.get_model(&scenario.net)) {
        scenario.check(&net)?;
    }
    let entry = state.write(|r| r.put_scenario(&scenario, &[]))?;
    Ok((StatusCode::CREATED, Json(entry)).into_response())
}

async fn list_scenarios(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    Ok(Json(state.read(|r| Ok(r.list(DocumentKind::Scenario)))?).into_response())
}

async fn get_scenario(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let scenario = state.read(|r| r.get_scenario(&Id::new(id)))?;
    Ok(json_text(StatusCode::OK, hpn_core::document::scenario_to_json(&scenario)))
}

async fn delete_scenario(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    state.write(|r| r.delete(DocumentKind::Scenario, &Id::new(id)))?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ComposeBody {
    /// Stored model ids, in composition order.
    models: Vec<Id>,
    /// `model.element=model.element`.
    #[serde(default)]
    fusions: Vec<String>,
}

async fn post_compose(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let body: ComposeBody = from_json(text(&body)?)?;
    let fusions = body
        .fusions
        .iter()
        .map(|f| f.parse::<Fusion>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "Schema", e.to_string()))?;
    let models: Vec<HybridNet> = body
        .models
        .iter()
        .map(|id| state.read(|r| r.get_model(id)))
        .collect::<ApiResult<_>>()?;
    let net = compose(&models, &fusions)?;
    Ok(json_text(StatusCode::OK, hpn_core::document::net_to_json(&net)))
}

/// Runs the scenario on its stored net, stores the trace and returns it.
/// The stored trace id is in the `Location` header.
async fn post_simulate(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let scenario = scenario_from_json(text(&body)?)?;
    let net = state.read(|r| r.get_model(&scenario.net))?;
    scenario.check(&net)?;
    let run = scenario.clone();
    let trace = state.on_worker(move || simulate::<f64>(&net, &run)).await?;
    let entry = state.write(|r| r.put_trace(&trace, &[]))?;
    let location = format!("/traces/{}", entry.id);
    Ok((
        StatusCode::OK,
        [(header::CONTENT_TYPE, "application/json".to_string()), (header::LOCATION, location)],
        to_json(&trace),
    )
        .into_response())
}

fn default_budget() -> usize {
    1000
}

/// Either a full scenario or a stored scenario id, with an optional
/// deadline override.
#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct AnalyzeBody {
    net: Id,
    #[serde(default)]
    scenario: Option<ScenarioConfig>,
    #[serde(default)]
    scenario_id: Option<Id>,
    #[serde(default)]
    deadline: Option<f64>,
    #[serde(default = "default_budget")]
    max_configurations: usize,
    #[serde(default)]
    exploration_mode: ExplorationMode,
}

async fn post_analyze(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let body: AnalyzeBody = from_json(text(&body)?)?;
    let net = state.read(|r| r.get_model(&body.net))?;
    let mut scenario = match (body.scenario, &body.scenario_id) {
        (Some(s), None) => s,
        (None, Some(id)) => state.read(|r| r.get_scenario(id))?,
        _ => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "Schema",
                "give exactly one of `scenario` and `scenarioId`",
            ))
        }
    };
    if body.deadline.is_some() {
        scenario.deadline = body.deadline;
    }
    let request = AnalysisRequest {
        net: body.net,
        scenario,
        max_configurations: body.max_configurations,
        exploration_mode: body.exploration_mode,
    };
    dss::check_request(&net, &request)?;

    let job = state.jobs.create();
    let worker = state.clone();
    let id = job.clone();
    tokio::spawn(async move {
        let permit = worker.workers.clone().acquire_owned().await.expect("pool is never closed");
        worker.jobs.advance(&id, JobState::Running);
        let outcome = tokio::task::spawn_blocking(move || dss::analyze(&net, &request)).await;
        drop(permit);
        let state = match outcome {
            Ok(Ok(analysis)) => match worker.write(|r| r.put_report(&analysis, &[])) {
                Ok(report) => JobState::Done {
                    report: report.id.expect("stored reports have ids"),
                },
                Err(e) => JobState::Failed {
                    reason: e.body["message"].as_str().unwrap_or("storage failed").to_string(),
                },
            },
            Ok(Err(e)) => JobState::Failed { reason: e.to_string() },
            Err(e) => JobState::Failed { reason: e.to_string() },
        };
        worker.jobs.advance(&id, state);
    });
    Ok((StatusCode::ACCEPTED, Json(serde_json::json!({ "jobId": job }))).into_response())
}

async fn get_job(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let handle = state.jobs.get(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    Ok(Json(handle).into_response())
}

async fn get_report(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let report = state.read(|r| r.get_report(&Id::new(id)))?;
    Ok(json_text(StatusCode::OK, to_json(&report)))
}

async fn get_history(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    Ok(Json(state.read(|r| r.history())?).into_response())
}

#[derive(Deserialize)]
struct CompareQuery {
    /// Comma-separated report or trace ids.
    ids: String,
}

async fn get_compare(State(state): State<Arc<AppState>>, Query(q): Query<CompareQuery>) -> ApiResult<Response> {
    let ids: Vec<Id> = q.ids.split(',').filter(|s| !s.is_empty()).map(Id::new).collect();
    Ok(Json(state.read(|r| r.compare(&ids))?).into_response())
}

/// `/traces/{id}.csv` serves the CSV export, `/traces/{id}` the JSON trace.
async fn get_trace(State(state): State<Arc<AppState>>, Path(file): Path<String>) -> ApiResult<Response> {
    match file.strip_suffix(".csv") {
        Some(id) => {
            let csv = state.read(|r| r.get_trace_csv(&Id::new(id)))?;
            Ok(([(header::CONTENT_TYPE, "text/csv")], csv).into_response())
        }
        None => {
            let trace = state.read(|r| r.get_trace(&Id::new(file)))?;
            Ok(json_text(StatusCode::OK, to_json(&trace)))
        }
    }
}
