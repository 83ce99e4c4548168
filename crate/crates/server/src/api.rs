//! HTTP/JSON surface over a shared [`Workspace`].

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use crowdsense::eval::{sus_adjectival, sus_composite, TaskTiming};
use crowdsense::ingestion::SourceKind;
use crowdsense::pipeline::{Pipeline, PipelineConfig, PipelineRun, RunLock, RunStatus};
use crowdsense::{CategoryId, Config, Error, ProviderKind, RunId, SolutionId, Workspace};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::providers::{self, SharedProvider};

pub const DEFAULT_PAGE_SIZE: usize = 20;

// ---- errors ----

/// `{code, message}` plus, for edit conflicts, the current document.
#[derive(Debug)]
pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError(Error::invalid(r.body_text()))
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError(Error::invalid(r.body_text()))
    }
}

pub fn status_of(e: &Error) -> StatusCode {
    match e {
        Error::InvalidRequest(_) => StatusCode::BAD_REQUEST,
        Error::NotFound { .. } => StatusCode::NOT_FOUND,
        Error::Conflict { .. } | Error::AlreadyRunning => StatusCode::CONFLICT,
        Error::Provider(_) => StatusCode::BAD_GATEWAY,
        Error::CorruptLog { .. } | Error::Storage(_) | Error::Serde(_) | Error::Internal(_) => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_of(&self.0);
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        let mut doc = json!({ "code": self.0.code(), "message": self.0.to_string() });
        if let Error::Conflict {
            current: Some(current), ..
        } = &self.0
        {
            doc["current"] = current.clone();
        }
        (status, Json(doc)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct Body<T>(pub T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
pub struct Query<T>(pub T);

// ---- shared state ----

#[derive(Clone, Debug, Serialize)]
pub struct JobView {
    pub id: RunId,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct Inner {
    pub workspace: RwLock<Workspace>,
    pub config: Config,
    pub provider: SharedProvider,
    pub run_lock: Arc<RunLock>,
    /// Runs started through the API that have not been committed (or that
    /// failed before they could be).
    pub jobs: Mutex<BTreeMap<RunId, JobView>>,
}

#[derive(Clone)]
pub struct AppState(pub Arc<Inner>);

impl AppState {
    pub fn new(workspace: Workspace, config: Config) -> crowdsense::Result<Self> {
        let provider = providers::build(&config.provider, None)?;
        Ok(Self::with_provider(workspace, config, provider))
    }

    pub fn with_provider(workspace: Workspace, config: Config, provider: SharedProvider) -> Self {
        let workspace = workspace.with_disclaimer(config.disclaimer_text.clone());
        AppState(Arc::new(Inner {
            workspace: RwLock::new(workspace),
            config,
            provider,
            run_lock: RunLock::new(),
            jobs: Mutex::new(BTreeMap::new()),
        }))
    }

    fn pipeline_config(&self) -> PipelineConfig {
        self.0.config.pipeline()
    }

    fn provider_for(&self, kind: Option<ProviderKind>) -> crowdsense::Result<SharedProvider> {
        match kind {
            None => Ok(self.0.provider.clone()),
            Some(k) => providers::build(&self.0.config.provider, Some(k)),
        }
    }

    /// Run a mutation off the async workers; commits fsync the log.
    async fn write<T, F>(&self, f: F) -> ApiResult<T>
    where
        T: Send + 'static,
        F: FnOnce(&mut Workspace) -> crowdsense::Result<T> + Send + 'static,
    {
        let inner = self.0.clone();
        tokio::task::spawn_blocking(move || f(&mut inner.workspace.write()))
            .await
            .map_err(|e| ApiError(Error::Internal(format!("worker panicked: {e}"))))?
            .map_err(ApiError)
    }

    fn read<T>(&self, f: impl FnOnce(&Workspace) -> crowdsense::Result<T>) -> ApiResult<T> {
        f(&self.0.workspace.read()).map_err(ApiError)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/ingest/:kind", post(ingest))
        .route("/sources", get(sources))
        .route("/issues", post(add_issue))
        .route("/unassigned", get(unassigned))
        .route("/pipeline/run", post(run_pipeline))
        .route("/pipeline/runs/:id", get(get_run))
        .route("/problems", get(zoom_out))
        .route("/problems/:id", get(zoom_in))
        .route("/problems/:id/upvote", post(upvote))
        .route("/problems/:id/chat", get(chat).post(post_chat))
        .route("/problems/:id/document", get(document).put(edit_document))
        .route("/problems/:id/document/annotations", post(annotate))
        .route("/problems/:id/solutions", get(solutions).post(propose))
        .route("/problems/:id/solutions/:sid/vote", post(vote))
        .route("/problems/:id/ai-solutions", post(ai_solutions))
        .route("/problems/:id/final", get(final_view).post(finalize))
        .route("/sessions/:id/tasks/:n/:action", post(task))
        .route("/sus", post(sus))
        .fallback(|| async { ApiError(Error::not_found("route", "requested path")) })
        .with_state(state)
}

// ---- handlers ----

async fn health(State(app): State<AppState>) -> Json<Value> {
    let ws = app.0.workspace.read();
    Json(json!({
        "status": "ok",
        "sequence_no": ws.state().last_sequence_no,
        "state_hash": ws.state_hash(),
        "pipeline_running": app.0.run_lock.is_running(),
    }))
}

#[derive(Deserialize)]
struct IngestBody {
    source_name: String,
    records: Vec<Value>,
}

async fn ingest(State(app): State<AppState>, Path(kind): Path<String>, Body(body): Body<IngestBody>) -> ApiResult<Response> {
    let kind = match SourceKind::parse(&kind) {
        Some(k @ (SourceKind::Subreddit | SourceKind::AppStoreReview)) => k,
        _ => {
            return Err(Error::invalid(format!(
                "unknown source kind {kind:?}; expected subreddit or app_store_review"
            ))
            .into())
        }
    };
    let report = app
        .write(move |ws| ws.ingest(kind, &body.source_name, &body.records))
        .await?;
    Ok(Json(report).into_response())
}

async fn sources(State(app): State<AppState>) -> Response {
    Json(app.0.workspace.read().list_data_sources()).into_response()
}

#[derive(Deserialize)]
struct IssueBody {
    #[serde(default)]
    author_handle: Option<String>,
    body: String,
}

async fn add_issue(State(app): State<AppState>, Body(body): Body<IssueBody>) -> ApiResult<Response> {
    let complaint = app
        .write(move |ws| ws.add_manual_issue(body.author_handle.as_deref(), &body.body))
        .await?;
    Ok((StatusCode::CREATED, Json(complaint)).into_response())
}

#[derive(Deserialize)]
struct PageParams {
    page: Option<usize>,
    page_size: Option<usize>,
}

impl PageParams {
    fn get(&self) -> (usize, usize) {
        (self.page.unwrap_or(1), self.page_size.unwrap_or(DEFAULT_PAGE_SIZE))
    }
}

async fn unassigned(State(app): State<AppState>, Query(p): Query<PageParams>) -> ApiResult<Response> {
    let (page, size) = p.get();
    Ok(Json(app.read(|ws| ws.list_unassigned(page, size))?).into_response())
}

#[derive(Deserialize, Default)]
struct RunBody {
    #[serde(default)]
    provider: Option<ProviderKind>,
}

/// Starts a background run: 202 with the run id, 409 if one is running.
async fn run_pipeline(State(app): State<AppState>, body: Option<Body<RunBody>>) -> ApiResult<Response> {
    let body = body.map(|Body(b)| b).unwrap_or_default();
    let provider = app.provider_for(body.provider)?;
    let guard = app.0.run_lock.try_acquire()?;
    let request = app.read(|ws| ws.prepare_run())?;
    let run_id = request.run_id.clone();
    app.0.jobs.lock().insert(
        run_id.clone(),
        JobView {
            id: run_id.clone(),
            status: RunStatus::Running,
            error: None,
        },
    );
    let config = app.pipeline_config();
    let inner = app.0.clone();
    tokio::task::spawn_blocking(move || {
        let _guard = guard;
        let id = request.run_id.clone();
        let result = {
            let clock = crowdsense::SystemClock;
            Pipeline::new(provider.as_ref(), &config).run(request.run_id, &request.complaints, &clock)
        }
        .and_then(|outcome| inner.workspace.write().commit_pipeline(outcome));
        let mut jobs = inner.jobs.lock();
        match result {
            Ok(run) => {
                tracing::info!(run = %id, status = ?run.status, "pipeline job finished");
                jobs.remove(&id);
            }
            Err(e) => {
                tracing::error!(run = %id, error = %e, "pipeline job failed");
                jobs.insert(
                    id.clone(),
                    JobView {
                        id,
                        status: RunStatus::Failed,
                        error: Some(e.to_string()),
                    },
                );
            }
        }
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "run_id": run_id, "status": RunStatus::Running }))).into_response())
}

#[derive(Deserialize)]
struct RunParams {
    #[serde(default)]
    include_requests: bool,
}

#[derive(Serialize)]
struct RunView {
    #[serde(flatten)]
    run: PipelineRun,
    request_count: usize,
}

async fn get_run(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(params): Query<RunParams>,
) -> ApiResult<Response> {
    let id = RunId::from(id);
    if let Some(job) = app.0.jobs.lock().get(&id) {
        return Ok(Json(job.clone()).into_response());
    }
    let view = app.read(|ws| {
        let run = ws.run(&id)?;
        Ok(RunView {
            request_count: run.requests.len(),
            run: if params.include_requests { run.clone() } else { run.header() },
        })
    })?;
    Ok(Json(view).into_response())
}

async fn zoom_out(State(app): State<AppState>) -> Response {
    Json(app.0.workspace.read().zoom_out()).into_response()
}

async fn zoom_in(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(p): Query<PageParams>,
) -> ApiResult<Response> {
    let (page, size) = p.get();
    Ok(Json(app.read(|ws| ws.zoom_in(&CategoryId::from(id), page, size))?).into_response())
}

#[derive(Deserialize)]
struct VoterBody {
    voter_handle: String,
}

async fn upvote(State(app): State<AppState>, Path(id): Path<String>, Body(body): Body<VoterBody>) -> ApiResult<Response> {
    let category_id = CategoryId::from(id);
    let cid = category_id.clone();
    let count = app.write(move |ws| ws.upvote_problem(&cid, &body.voter_handle)).await?;
    Ok(Json(json!({ "category_id": category_id, "upvote_count": count })).into_response())
}

async fn chat(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(app.read(|ws| ws.chat_thread(&CategoryId::from(id)))?).into_response())
}

#[derive(Deserialize)]
struct AuthoredBody {
    author_handle: String,
    body: String,
}

async fn post_chat(State(app): State<AppState>, Path(id): Path<String>, Body(body): Body<AuthoredBody>) -> ApiResult<Response> {
    let message = app
        .write(move |ws| ws.post_chat_message(&CategoryId::from(id), &body.author_handle, &body.body))
        .await?;
    Ok((StatusCode::CREATED, Json(message)).into_response())
}

async fn document(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(app.read(|ws| ws.document(&CategoryId::from(id)))?).into_response())
}

#[derive(Deserialize)]
struct EditBody {
    base_version: u64,
    body: String,
}

async fn edit_document(State(app): State<AppState>, Path(id): Path<String>, Body(body): Body<EditBody>) -> ApiResult<Response> {
    let doc = app
        .write(move |ws| ws.edit_document(&CategoryId::from(id), body.base_version, &body.body))
        .await?;
    Ok(Json(doc).into_response())
}

#[derive(Deserialize)]
struct AnnotationBody {
    author_handle: String,
    start: usize,
    end: usize,
    note: String,
}

async fn annotate(State(app): State<AppState>, Path(id): Path<String>, Body(body): Body<AnnotationBody>) -> ApiResult<Response> {
    let doc = app
        .write(move |ws| {
            ws.annotate_document(&CategoryId::from(id), &body.author_handle, (body.start, body.end), &body.note)
        })
        .await?;
    Ok((StatusCode::CREATED, Json(doc)).into_response())
}

async fn solutions(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(app.read(|ws| ws.list_solutions(&CategoryId::from(id)))?).into_response())
}

async fn propose(State(app): State<AppState>, Path(id): Path<String>, Body(body): Body<AuthoredBody>) -> ApiResult<Response> {
    let view = app
        .write(move |ws| ws.propose_solution(&CategoryId::from(id), &body.author_handle, &body.body))
        .await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn vote(
    State(app): State<AppState>,
    Path((id, sid)): Path<(String, String)>,
    Body(body): Body<VoterBody>,
) -> ApiResult<Response> {
    let view = app
        .write(move |ws| ws.vote_solution(&CategoryId::from(id), &SolutionId::from(sid), &body.voter_handle))
        .await?;
    Ok(Json(view).into_response())
}

async fn ai_solutions(State(app): State<AppState>, Path(id): Path<String>, body: Option<Body<RunBody>>) -> ApiResult<Response> {
    let body = body.map(|Body(b)| b).unwrap_or_default();
    let provider = app.provider_for(body.provider)?;
    let config = app.pipeline_config();
    let category_id = CategoryId::from(id);
    let (run_id, name, members) = app.read(|ws| ws.solutions_request(&category_id))?;
    let inner = app.0.clone();
    let views = tokio::task::spawn_blocking(move || {
        let started_at = inner.workspace.read().now();
        let outcome = Pipeline::new(provider.as_ref(), &config).solutions(&name, &members)?;
        inner
            .workspace
            .write()
            .commit_ai_solutions(&category_id, run_id, started_at, provider.id(), outcome)
    })
    .await
    .map_err(|e| ApiError(Error::Internal(format!("worker panicked: {e}"))))??;
    Ok((StatusCode::CREATED, Json(views)).into_response())
}

async fn final_view(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let category_id = CategoryId::from(id);
    let view = app.read(|ws| ws.final_view(&category_id))?;
    match view {
        Some(v) => Ok(Json(v).into_response()),
        None => Err(Error::not_found("final solution", category_id).into()),
    }
}

#[derive(Deserialize)]
struct FinalBody {
    solution_id: String,
    decided_by: Vec<String>,
    #[serde(default)]
    replace: bool,
}

async fn finalize(State(app): State<AppState>, Path(id): Path<String>, Body(body): Body<FinalBody>) -> ApiResult<Response> {
    let view = app
        .write(move |ws| {
            ws.finalize_solution(
                &CategoryId::from(id),
                &SolutionId::from(body.solution_id),
                &body.decided_by,
                body.replace,
            )
        })
        .await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

#[derive(Serialize)]
struct TimingView {
    #[serde(flatten)]
    timing: TaskTiming,
    duration_seconds: Option<f64>,
}

async fn task(State(app): State<AppState>, Path((session, n, action)): Path<(String, String, String)>) -> ApiResult<Response> {
    let index: u8 = n
        .parse()
        .map_err(|_| Error::invalid(format!("task index {n:?} is not a number in 1..6")))?;
    let start = match action.as_str() {
        "start" => true,
        "stop" => false,
        other => return Err(Error::not_found("task action", other).into()),
    };
    let timing = app
        .write(move |ws| {
            if start {
                ws.start_task(&session, index)
            } else {
                ws.stop_task(&session, index)
            }
        })
        .await?;
    Ok(Json(TimingView {
        duration_seconds: timing.duration_seconds(),
        timing,
    })
    .into_response())
}

#[derive(Deserialize)]
struct SusBody {
    #[serde(default)]
    session_id: Option<String>,
    answers: Vec<u8>,
}

async fn sus(Body(body): Body<SusBody>) -> ApiResult<Response> {
    let score = sus_composite(&body.answers)?;
    let rating = sus_adjectival(score)?;
    Ok(Json(json!({
        "session_id": body.session_id,
        "score": score,
        "adjectival": rating,
    }))
    .into_response())
}
