//! JSON-over-HTTP session service backing the graph editor.
//!
//! Each session holds a scene, a goal graph and, once computed, a goal and
//! a plan. Mutations may carry the revision the client last saw; a stale
//! revision is rejected with 409. Every mutation works on a copy of the
//! session and commits only on success.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::RwLock as AsyncRwLock;

use sgbot_core::graph::{apply_edits, Edge, EditError, GraphEdit, RelationLabel, SceneGraph};
use sgbot_core::io::{GoalDoc, GraphDoc, PlanDoc, SceneDoc};
use sgbot_core::planner::{apply_action, Plan};
use sgbot_core::scene::SceneState;
use sgbot_core::synth::{GoalScene, SynthError};

use crate::config::AppConfig;
use crate::pipeline;

#[derive(Debug, Clone)]
pub struct Session {
    pub id: u64,
    pub revision: u64,
    pub scene: SceneState,
    pub graph: SceneGraph,
    pub goal: Option<GoalScene>,
    pub plan: Option<Plan>,
    /// Number of plan actions already applied to `scene`.
    pub step: usize,
}

impl Session {
    fn invalidate(&mut self) {
        self.goal = None;
        self.plan = None;
        self.step = 0;
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            session_id: self.id,
            revision: self.revision,
            scene: SceneDoc::from_scene(&self.scene),
            graph: GraphDoc::from_graph(&self.graph),
            goal: self.goal.as_ref().map(GoalDoc::from_goal),
            plan: self.plan.as_ref().map(PlanDoc::from_plan),
            step: self.step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub session_id: u64,
    pub revision: u64,
    pub scene: SceneDoc,
    pub graph: GraphDoc,
    pub goal: Option<GoalDoc>,
    pub plan: Option<PlanDoc>,
    pub step: usize,
}

type SessionRef = Arc<AsyncRwLock<Session>>;

/// Shared state of the service.
pub struct AppState {
    cfg: AppConfig,
    sessions: RwLock<BTreeMap<u64, SessionRef>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(cfg: AppConfig) -> Arc<Self> {
        Arc::new(Self {
            cfg,
            sessions: RwLock::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
        })
    }

    fn session(&self, id: u64) -> Result<SessionRef, ApiError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(&id)
            .cloned()
            .ok_or_else(|| {
                ApiError::new(
                    StatusCode::NOT_FOUND,
                    "unknown_session",
                    format!("no session {id}"),
                )
            })
    }

    /// Snapshots of every session, in id order.
    pub async fn snapshots(&self) -> Vec<SessionSnapshot> {
        let sessions: Vec<SessionRef> = self
            .sessions
            .read()
            .expect("session map lock")
            .values()
            .cloned()
            .collect();
        let mut out = Vec::with_capacity(sessions.len());
        for s in sessions {
            out.push(s.read().await.snapshot());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub detail: String,
    pub extra: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, detail: impl Into<String>) -> Self {
        Self {
            status,
            code,
            detail: detail.into(),
            extra: Value::Null,
        }
    }

    fn with(mut self, extra: Value) -> Self {
        self.extra = extra;
        self
    }

    fn unprocessable(code: &'static str, detail: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, detail)
    }

    fn conflict(code: &'static str, detail: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.code, "detail": self.detail});
        if let (Value::Object(map), Value::Object(extra)) = (&mut body, self.extra) {
            map.extend(extra);
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::new(r.status(), "invalid_body", r.body_text())
    }
}

fn edit_error(e: EditError) -> ApiError {
    let code = match e {
        EditError::UnknownReference { .. } => "unknown_reference",
        EditError::InvariantViolation { .. } => "invariant_violation",
    };
    ApiError::unprocessable(code, e.to_string()).with(json!({"index": e.index()}))
}

fn edges_json(edges: &[Edge]) -> Value {
    serde_json::to_value(edges).expect("edges serialize")
}

fn synth_error(e: SynthError) -> ApiError {
    match &e {
        SynthError::LayoutInfeasible { edges, .. } => {
            ApiError::unprocessable("layout_infeasible", e.to_string())
                .with(json!({"edges": edges_json(edges)}))
        }
        _ => ApiError::unprocessable("synthesis_failed", e.to_string()),
    }
}

fn check_revision(session: &Session, expected: Option<u64>) -> Result<(), ApiError> {
    match expected {
        Some(r) if r != session.revision => Err(ApiError::conflict(
            "stale_revision",
            format!("expected revision {r}, session is at {}", session.revision),
        )
        .with(json!({"revision": session.revision}))),
        _ => Ok(()),
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> T + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Deserialize)]
struct CreateRequest {
    scene: SceneDoc,
    graph: Option<GraphDoc>,
    /// Start from the commonsense graph instead of a blank one.
    #[serde(default)]
    commonsense: bool,
}

#[derive(Debug, Serialize)]
struct CreateResponse {
    session_id: u64,
    revision: u64,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<CreateResponse>), ApiError> {
    let Json(req) = body?;
    let scene = req
        .scene
        .to_scene()
        .map_err(|e| ApiError::unprocessable("invalid_scene", e.to_string()))?;
    let graph = match (req.graph, req.commonsense) {
        (Some(doc), _) => {
            let g = doc
                .to_graph()
                .map_err(|e| ApiError::unprocessable("invariant_violation", e.to_string()))?;
            pipeline::check_graph_nodes(&g, &scene)
                .map_err(|d| ApiError::unprocessable("unknown_reference", d))?;
            g
        }
        (None, true) => pipeline::commonsense_graph(&scene)
            .map_err(|e| ApiError::unprocessable("no_placeable_objects", e.to_string()))?,
        (None, false) => pipeline::blank_graph(&scene),
    };
    let id = state.next_id.fetch_add(1, Ordering::Relaxed);
    let session = Session {
        id,
        revision: 1,
        scene,
        graph,
        goal: None,
        plan: None,
        step: 0,
    };
    state
        .sessions
        .write()
        .expect("session map lock")
        .insert(id, Arc::new(AsyncRwLock::new(session)));
    Ok((
        StatusCode::CREATED,
        Json(CreateResponse {
            session_id: id,
            revision: 1,
        }),
    ))
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<u64>,
) -> ApiResult<SessionSnapshot> {
    let session = state.session(id)?;
    let guard = session.read().await;
    Ok(Json(guard.snapshot()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRequest {
    revision: Option<u64>,
    edits: Option<Vec<GraphEdit>>,
    graph: Option<GraphDoc>,
}

async fn put_graph(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<u64>,
    body: Result<Json<GraphRequest>, JsonRejection>,
) -> ApiResult<SessionSnapshot> {
    let session = state.session(id)?;
    let Json(req) = body?;
    let mut guard = session.write().await;
    check_revision(&guard, req.revision)?;
    let graph = match (req.edits, req.graph) {
        (Some(edits), None) => apply_edits(&guard.graph, &edits).map_err(edit_error)?,
        (None, Some(doc)) => {
            let g = doc
                .to_graph()
                .map_err(|e| ApiError::unprocessable("invariant_violation", e.to_string()))?;
            pipeline::check_graph_nodes(&g, &guard.scene)
                .map_err(|d| ApiError::unprocessable("unknown_reference", d))?;
            g
        }
        _ => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_body",
                "exactly one of `edits` and `graph` is required",
            ))
        }
    };
    guard.graph = graph;
    guard.invalidate();
    guard.revision += 1;
    Ok(Json(guard.snapshot()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GoalRequest {
    #[serde(default)]
    seed: u64,
    revision: Option<u64>,
}

#[derive(Debug, Serialize)]
struct GoalResponse {
    revision: u64,
    goal: GoalDoc,
}

async fn post_goal(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<u64>,
    body: Result<Json<GoalRequest>, JsonRejection>,
) -> ApiResult<GoalResponse> {
    let session = state.session(id)?;
    let Json(req) = body?;
    let mut guard = session.write().await;
    check_revision(&guard, req.revision)?;
    let (scene, graph) = (guard.scene.clone(), guard.graph.clone());
    let st = state.clone();
    let goal = blocking(move || pipeline::synthesize(&scene, &graph, req.seed, &st.cfg))
        .await?
        .map_err(synth_error)?;
    let doc = GoalDoc::from_goal(&goal);
    guard.goal = Some(goal);
    guard.plan = None;
    guard.step = 0;
    guard.revision += 1;
    Ok(Json(GoalResponse {
        revision: guard.revision,
        goal: doc,
    }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanRequest {
    sigma: Option<f64>,
    revision: Option<u64>,
}

#[derive(Debug, Serialize)]
struct PlanResponse {
    revision: u64,
    plan: PlanDoc,
}

async fn post_plan(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<u64>,
    body: Result<Json<PlanRequest>, JsonRejection>,
) -> ApiResult<PlanResponse> {
    let session = state.session(id)?;
    let Json(req) = body?;
    let mut guard = session.write().await;
    check_revision(&guard, req.revision)?;
    let goal = guard
        .goal
        .clone()
        .ok_or_else(|| ApiError::conflict("no_goal", "synthesize a goal before planning"))?;
    let scene = guard.scene.clone();
    let st = state.clone();
    let (_, plan) = blocking(move || pipeline::plan(&scene, &goal, req.sigma, &st.cfg))
        .await?
        .map_err(|e| ApiError::unprocessable("planning_failed", e.to_string()))?;
    let doc = PlanDoc::from_plan(&plan);
    guard.plan = Some(plan);
    guard.step = 0;
    guard.revision += 1;
    Ok(Json(PlanResponse {
        revision: guard.revision,
        plan: doc,
    }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRequest {
    revision: Option<u64>,
}

async fn post_step(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<u64>,
    body: Option<Json<StepRequest>>,
) -> ApiResult<SessionSnapshot> {
    let session = state.session(id)?;
    let req = body.map(|Json(r)| r).unwrap_or_default();
    let mut guard = session.write().await;
    check_revision(&guard, req.revision)?;
    let plan = guard
        .plan
        .as_ref()
        .ok_or_else(|| ApiError::conflict("no_plan", "compute a plan before stepping"))?;
    let action = *plan.actions.get(guard.step).ok_or_else(|| {
        ApiError::conflict(
            "plan_finished",
            format!("all {} actions applied", plan.actions.len()),
        )
        .with(json!({"status": plan.status}))
    })?;
    let scene = apply_action(&guard.scene, &action)
        .map_err(|e| ApiError::unprocessable("step_failed", e.to_string()))?;
    guard.scene = scene;
    guard.step += 1;
    guard.revision += 1;
    Ok(Json(guard.snapshot()))
}

async fn relation_schema() -> Json<Value> {
    let relations: Vec<Value> = RelationLabel::ALL
        .into_iter()
        .map(|r| {
            json!({
                "name": r.as_str(),
                "directional": r.is_directional(),
                "inverse": r.inverse().map(RelationLabel::as_str),
            })
        })
        .collect();
    Json(json!({ "relations": relations }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/graph", axum::routing::put(put_graph))
        .route("/sessions/{id}/goal", post(post_goal))
        .route("/sessions/{id}/plan", post(post_plan))
        .route("/sessions/{id}/step", post(post_step))
        .route("/schema/relations", get(relation_schema))
        .with_state(state)
}

/// Writes `session_<id>.json` for every session into `dir`.
pub async fn write_snapshots(state: &AppState, dir: &Path) -> std::io::Result<usize> {
    std::fs::create_dir_all(dir)?;
    let snapshots = state.snapshots().await;
    for s in &snapshots {
        let mut body = serde_json::to_vec(s).map_err(std::io::Error::other)?;
        body.push(b'\n');
        std::fs::write(dir.join(format!("session_{}.json", s.session_id)), body)?;
    }
    Ok(snapshots.len())
}

/// Serves until Ctrl-C, then dumps sessions if a snapshot directory is set.
pub async fn serve(cfg: AppConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(&cfg.server.addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    let snapshot_dir = cfg.server.snapshot_dir.clone();
    let state = AppState::new(cfg);
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    if let Some(dir) = snapshot_dir {
        let n = write_snapshots(&state, &dir).await?;
        eprintln!("wrote {n} session snapshots to {}", dir.display());
    }
    Ok(())
}
