mod common;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use sgbot_core::graph::{Edge, RelationLabel};
use sgbot_core::io::{save_plan, GraphDoc, PlanDoc, SceneDoc};
use sgbot_core::planner::execute_plan;
use sgbot_core::synth::synthesize_goal;
use sgbot_service::config::AppConfig;
use sgbot_service::server::{router, AppState};

fn app() -> Router {
    router(AppState::new(AppConfig::default()))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

fn scene_json() -> Value {
    serde_json::to_value(SceneDoc::from_scene(&common::plate_fork_knife())).unwrap()
}

async fn create(app: &Router) -> u64 {
    let (status, body) = call(
        app,
        Method::POST,
        "/sessions",
        Some(json!({"scene": scene_json()})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["revision"], 1);
    body["session_id"].as_u64().unwrap()
}

fn cutlery_edits() -> Value {
    json!([
        {"op": "add_edge", "from": 2, "to": 1, "relation": "left"},
        {"op": "add_edge", "from": 3, "to": 1, "relation": "right"},
    ])
}

#[tokio::test]
async fn relation_schema_lists_the_vocabulary() {
    let (status, body) = call(&app(), Method::GET, "/schema/relations", None).await;
    assert_eq!(status, StatusCode::OK);
    let names: Vec<&str> = body["relations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "left",
            "right",
            "front",
            "behind",
            "standing_on",
            "close_by"
        ]
    );
    assert_eq!(body["relations"][0]["inverse"], "right");
    assert_eq!(body["relations"][4]["inverse"], Value::Null);
    assert_eq!(body["relations"][5]["directional"], false);
}

#[tokio::test]
async fn new_session_has_blank_graph() {
    let app = app();
    let id = create(&app).await;
    let (status, snap) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(snap["session_id"], id);
    assert_eq!(snap["graph"]["nodes"].as_array().unwrap().len(), 3);
    assert_eq!(snap["graph"]["edges"].as_array().unwrap().len(), 0);
    assert_eq!(snap["goal"], Value::Null);
    assert_eq!(snap["plan"], Value::Null);
    assert_eq!(snap["step"], 0);
}

#[tokio::test]
async fn commonsense_session_starts_with_rule_edges() {
    let app = app();
    let (_, body) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"scene": scene_json(), "commonsense": true})),
    )
    .await;
    let id = body["session_id"].as_u64().unwrap();
    let (_, snap) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(snap["graph"]["edges"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn unknown_session_is_404() {
    let app = app();
    let (status, body) = call(&app, Method::GET, "/sessions/99", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_session");
    let (status, _) = call(&app, Method::POST, "/sessions/99/step", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn self_edge_is_rejected_without_side_effects() {
    let app = app();
    let id = create(&app).await;
    let uri = format!("/sessions/{id}/graph");
    let (status, body) = call(
        &app,
        Method::PUT,
        &uri,
        Some(json!({"edits": [
            {"op": "add_edge", "from": 2, "to": 1, "relation": "left"},
            {"op": "add_edge", "from": 1, "to": 1, "relation": "close_by"},
        ]})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "invariant_violation");
    assert_eq!(body["index"], 1);
    let (_, snap) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(snap["revision"], 1);
    assert_eq!(snap["graph"]["edges"].as_array().unwrap().len(), 0);
}

#[tokio::test]
async fn unknown_node_in_edit_is_422() {
    let app = app();
    let id = create(&app).await;
    let (status, body) = call(
        &app,
        Method::PUT,
        &format!("/sessions/{id}/graph"),
        Some(json!({"edits": [{"op": "remove_node", "id": 42}]})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "unknown_reference");
}

#[tokio::test]
async fn stale_revision_is_409() {
    let app = app();
    let id = create(&app).await;
    let uri = format!("/sessions/{id}/graph");
    let (status, body) = call(
        &app,
        Method::PUT,
        &uri,
        Some(json!({"revision": 1, "edits": cutlery_edits()})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["revision"], 2);
    let (status, body) = call(
        &app,
        Method::PUT,
        &uri,
        Some(json!({"revision": 1, "edits": []})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "stale_revision");
    assert_eq!(body["revision"], 2);
}

#[tokio::test]
async fn graph_body_needs_exactly_one_form() {
    let app = app();
    let id = create(&app).await;
    let (status, _) = call(
        &app,
        Method::PUT,
        &format!("/sessions/{id}/graph"),
        Some(json!({})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn plan_and_step_need_their_inputs() {
    let app = app();
    let id = create(&app).await;
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/plan"),
        Some(json!({})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "no_goal");
    let (status, body) = call(&app, Method::POST, &format!("/sessions/{id}/step"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "no_plan");
}

#[tokio::test]
async fn contradictory_edges_report_the_cycle() {
    let app = app();
    let id = create(&app).await;
    call(
        &app,
        Method::PUT,
        &format!("/sessions/{id}/graph"),
        Some(json!({"edits": [
            {"op": "add_edge", "from": 2, "to": 3, "relation": "left"},
            {"op": "add_edge", "from": 3, "to": 2, "relation": "left"},
        ]})),
    )
    .await;
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/goal"),
        Some(json!({"seed": 0})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "layout_infeasible");
    assert_eq!(body["edges"].as_array().unwrap().len(), 2);
    let (_, snap) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(snap["revision"], 2);
    assert_eq!(snap["goal"], Value::Null);
}

#[tokio::test]
async fn editing_clears_goal_and_plan() {
    let app = app();
    let id = create(&app).await;
    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/goal"),
        Some(json!({"seed": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/plan"),
        Some(json!({})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (_, snap) = call(
        &app,
        Method::PUT,
        &format!("/sessions/{id}/graph"),
        Some(json!({"edits": cutlery_edits()})),
    )
    .await;
    assert_eq!(snap["goal"], Value::Null);
    assert_eq!(snap["plan"], Value::Null);
    assert_eq!(snap["revision"], 4);
}

#[tokio::test]
async fn step_through_matches_batch_execution() {
    let app = app();
    let id = create(&app).await;
    let (status, _) = call(
        &app,
        Method::PUT,
        &format!("/sessions/{id}/graph"),
        Some(json!({"revision": 1, "edits": cutlery_edits()})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (status, goal) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/goal"),
        Some(json!({"seed": 7, "revision": 2})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{goal}");
    assert_eq!(goal["revision"], 3);
    let (status, planned) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/plan"),
        Some(json!({"sigma": 0.01, "revision": 3})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{planned}");
    assert_eq!(planned["plan"]["status"], "complete");
    let n = planned["plan"]["actions"].as_array().unwrap().len();
    assert_eq!(n, 3);

    let mut last = Value::Null;
    for k in 0..n {
        let (status, snap) = call(&app, Method::POST, &format!("/sessions/{id}/step"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(snap["step"], k + 1);
        last = snap;
    }
    let (status, body) = call(&app, Method::POST, &format!("/sessions/{id}/step"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "plan_finished");
    assert_eq!(body["status"], "complete");

    // same inputs through the library
    let scene = common::plate_fork_knife();
    let graph = GraphDoc {
        nodes: serde_json::from_value(last["graph"]["nodes"].clone()).unwrap(),
        edges: vec![
            Edge::new(2, 1, RelationLabel::Left),
            Edge::new(3, 1, RelationLabel::Right),
        ],
    }
    .to_graph()
    .unwrap();
    let cfg = AppConfig::default();
    let goal_scene = synthesize_goal(&scene, &graph, 7, &cfg.layout()).unwrap();
    let (final_scene, plan) = execute_plan(&scene, &goal_scene, &cfg.planner, &cfg.icp).unwrap();
    let served: PlanDoc = serde_json::from_value(last["plan"].clone()).unwrap();
    assert_eq!(
        serde_json::to_vec(&served).unwrap(),
        save_plan(&plan)[..save_plan(&plan).len() - 1]
    );
    let served_scene: SceneDoc = serde_json::from_value(last["scene"].clone()).unwrap();
    assert_eq!(served_scene, SceneDoc::from_scene(&final_scene));
}

#[tokio::test]
async fn malformed_body_is_rejected() {
    let app = app();
    let req = Request::builder()
        .method(Method::POST)
        .uri("/sessions")
        .header("content-type", "application/json")
        .body(Body::from("{\"scene\": 3}"))
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn snapshots_are_written_per_session() {
    let state = AppState::new(AppConfig::default());
    let app = router(state.clone());
    let a = create(&app).await;
    let b = create(&app).await;
    let dir = tempfile::tempdir().unwrap();
    let n = sgbot_service::server::write_snapshots(&state, dir.path())
        .await
        .unwrap();
    assert_eq!(n, 2);
    for id in [a, b] {
        let bytes = std::fs::read(dir.path().join(format!("session_{id}.json"))).unwrap();
        let snap: Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(snap["session_id"], id);
    }
}
