use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use hpn_core::document::{net_to_json, scenario_to_json};
use hpn_core::fixtures::{case_a_scenario, case_study_net, example_scenario};
use hpn_core::repository::Repository;
use hpn_core::{ArcDef, ConflictPolicy, HybridNet, MaxSpeed, PlaceDef, ScenarioConfig, TransitionDef};
use hpn_service::{router, AppState};

struct Api {
    app: Router,
    _dir: tempfile::TempDir,
}

struct Reply {
    status: StatusCode,
    location: Option<String>,
    content_type: Option<String>,
    text: String,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("{e}: {}", self.text))
    }
}

impl Api {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let state: Arc<AppState> = AppState::new(Repository::open(dir.path()).unwrap(), 2);
        Api { app: router(state), _dir: dir }
    }

    async fn call(&self, method: Method, uri: &str, body: Option<String>) -> Reply {
        let request = Request::builder()
            .method(method)
            .uri(uri)
            .header(header::CONTENT_TYPE, "application/json")
            .body(body.map_or_else(Body::empty, Body::from))
            .unwrap();
        let response = self.app.clone().oneshot(request).await.unwrap();
        let status = response.status();
        let header_of = |name| {
            response
                .headers()
                .get(name)
                .map(|v: &axum::http::HeaderValue| v.to_str().unwrap().to_string())
        };
        let location = header_of(header::LOCATION);
        let content_type = header_of(header::CONTENT_TYPE);
        let bytes = response.into_body().collect().await.unwrap().to_bytes();
        Reply {
            status,
            location,
            content_type,
            text: String::from_utf8(bytes.to_vec()).unwrap(),
        }
    }

    async fn get(&self, uri: &str) -> Reply {
        self.call(Method::GET, uri, None).await
    }

    async fn post(&self, uri: &str, body: String) -> Reply {
        self.call(Method::POST, uri, Some(body)).await
    }

    async fn with_case_study() -> Self {
        let api = Api::new();
        let r = api.post("/models", net_to_json(&case_study_net())).await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
        api
    }

    async fn wait_for(&self, job: &str) -> Value {
        for _ in 0..500 {
            let handle = self.get(&format!("/jobs/{job}")).await.json();
            if handle["state"] == "done" || handle["state"] == "failed" {
                return handle;
            }
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        panic!("job {job} did not finish");
    }
}

#[tokio::test]
async fn models_can_be_stored_listed_fetched_and_deleted() {
    let api = Api::new();
    let net = case_study_net();
    let r = api.post("/models", net_to_json(&net)).await;
    assert_eq!(r.status, StatusCode::CREATED);
    assert_eq!(r.json()["id"], "hpn-case-study");

    let r = api.post("/models", net_to_json(&net)).await;
    assert_eq!(r.status, StatusCode::CONFLICT);

    let r = api.get("/models/hpn-case-study").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.text, net_to_json(&net));

    let list = api.get("/models").await.json();
    assert_eq!(list.as_array().unwrap().len(), 1);

    let r = api.call(Method::DELETE, "/models/hpn-case-study", None).await;
    assert_eq!(r.status, StatusCode::NO_CONTENT);
    assert_eq!(api.get("/models/hpn-case-study").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn unknown_model_is_404() {
    let api = Api::new();
    let r = api.get("/models/unknown").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["error"], "NotFound");
}

#[tokio::test]
async fn schema_errors_are_400_with_a_path() {
    let api = Api::new();
    let r = api
        .post("/models", r#"{"name":"n","places":[{"id":"P","kind":"continuous","initial":-1}]}"#.into())
        .await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["path"], "places[0].initial");
}

#[tokio::test]
async fn invalid_nets_are_422_with_violations() {
    let api = Api::new();
    let mut net = HybridNet::new("dangling");
    net.places.push(PlaceDef::continuous("P", 1.0));
    net.arcs.push(ArcDef::new("P", "Nowhere", 1.0));
    let r = api.post("/models", net_to_json(&net)).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(!r.json()["violations"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn scenarios_are_checked_against_their_net() {
    let api = Api::with_case_study().await;
    let r = api.post("/scenarios", scenario_to_json(&example_scenario())).await;
    assert_eq!(r.status, StatusCode::CREATED);
    let r = api.get(&format!("/scenarios/{}", example_scenario().id)).await;
    assert_eq!(r.text, scenario_to_json(&example_scenario()));

    let mut bad = example_scenario();
    bad.id = "bad".into();
    bad.target.place = "P99".into();
    let r = api.post("/scenarios", scenario_to_json(&bad)).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn simulate_returns_the_trace_and_stores_its_csv() {
    let api = Api::with_case_study().await;
    let r = api.post("/simulate", scenario_to_json(&example_scenario())).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let at = r.json()["outcome"]["at"].as_f64().unwrap();
    assert!((at - 2000.0 / 7.0).abs() < 1e-9);

    let location = r.location.unwrap();
    let stored = api.get(&location).await;
    assert_eq!(stored.text, r.text);
    let csv = api.get(&format!("{location}.csv")).await;
    assert_eq!(csv.status, StatusCode::OK);
    assert_eq!(csv.content_type.as_deref(), Some("text/csv"));
    assert!(csv.text.starts_with("phase_index,t_start,t_end,element_kind,element_id,value,slope"));

    let history = api.get("/history").await.json();
    assert_eq!(history.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn simulate_on_a_missing_net_is_404() {
    let api = Api::new();
    let r = api.post("/simulate", scenario_to_json(&example_scenario())).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
}

/// P1 -> T1 -> P2, with P2 sending 90% back to P1: each solver pass closes
/// only a tenth of the gap.
fn slow_loop() -> (HybridNet, ScenarioConfig) {
    let mut net = HybridNet::new("loop");
    net.places.push(PlaceDef::continuous("P1", 0.0));
    net.places.push(PlaceDef::continuous("P2", 0.0));
    net.places.push(PlaceDef::continuous("Out", 0.0));
    for (id, v) in [("Src", 1.0), ("T1", 100.0), ("Back", 100.0), ("Sink", 100.0)] {
        net.transitions.push(TransitionDef::continuous(id, MaxSpeed::Finite(v)));
    }
    for (from, to) in [("Src", "P1"), ("P1", "T1"), ("T1", "P2"), ("P2", "Back"), ("Back", "P1"), ("P2", "Sink"), ("Sink", "Out")] {
        net.arcs.push(ArcDef::new(from, to, 1.0));
    }
    net.policies.push(ConflictPolicy::sharing("P2", &[("Back", 9.0), ("Sink", 1.0)]));
    let scenario = ScenarioConfig::new("loop-run", "loop", "Out", 10.0, 100.0);
    (net, scenario)
}

#[tokio::test]
async fn engine_errors_are_500_with_a_diagnostic() {
    let api = Api::new();
    let (net, scenario) = slow_loop();
    assert_eq!(api.post("/models", net_to_json(&net)).await.status, StatusCode::CREATED);
    let r = api.post("/simulate", scenario_to_json(&scenario)).await;
    assert_eq!(r.status, StatusCode::INTERNAL_SERVER_ERROR);
    let body = r.json();
    assert_eq!(body["error"], "NonConvergence");
    assert!(body["diagnostic"]["last"]["T1"].is_number());
}

#[tokio::test]
async fn analysis_job_selects_case_b_for_deadline_500() {
    let api = Api::with_case_study().await;
    let body = json!({ "net": "hpn-case-study", "scenario": serde_json::from_str::<Value>(&scenario_to_json(&case_a_scenario())).unwrap(), "deadline": 500.0 });
    let r = api.post("/analyze", body.to_string()).await;
    assert_eq!(r.status, StatusCode::ACCEPTED, "{}", r.text);
    let job = r.json()["jobId"].as_str().unwrap().to_string();

    let handle = api.wait_for(&job).await;
    assert_eq!(handle["state"], "done", "{handle}");
    let report = api.get(&format!("/reports/{}", handle["report"].as_str().unwrap())).await.json();
    let selected = report["selected"]["policyOverrides"].clone();
    assert_eq!(selected[0]["order"], json!(["T15", "T5", "T4", "T6", "T16"]));
    assert_eq!(report["attempts"].as_array().unwrap().len(), 2);
    assert_eq!(report["attempts"][0]["meetsDeadline"], false);

    let rows = api.get(&format!("/compare?ids={}", handle["report"].as_str().unwrap())).await.json();
    assert!((rows[0]["deliveryTime"].as_f64().unwrap() - 3000.0 / 7.0).abs() < 1e-9);
}

#[tokio::test]
async fn analysis_by_stored_scenario_id() {
    let api = Api::with_case_study().await;
    api.post("/scenarios", scenario_to_json(&case_a_scenario())).await;
    let body = json!({ "net": "hpn-case-study", "scenarioId": case_a_scenario().id, "deadline": 300.0 });
    let job = api.post("/analyze", body.to_string()).await.json()["jobId"].as_str().unwrap().to_string();
    let handle = api.wait_for(&job).await;
    let report = api.get(&format!("/reports/{}", handle["report"].as_str().unwrap())).await.json();
    assert_eq!(report["attempts"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn analysis_without_deadline_is_rejected_up_front() {
    let api = Api::with_case_study().await;
    let body = json!({ "net": "hpn-case-study", "scenario": serde_json::from_str::<Value>(&scenario_to_json(&case_a_scenario())).unwrap() });
    let r = api.post("/analyze", body.to_string()).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(api.get("/jobs/job-1").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn compose_fuses_stored_models() {
    let api = Api::new();
    for name in ["west", "east"] {
        let mut net = case_study_net();
        net.name = name.into();
        api.post("/models", net_to_json(&net)).await;
    }
    let body = json!({ "models": ["west", "east"], "fusions": ["west.P4=east.P5"] });
    let r = api.post("/compose", body.to_string()).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let net = r.json();
    assert_eq!(net["name"], "west+east");

    let r = api.post("/compose", json!({ "models": ["west", "east"], "fusions": ["west.P4=east.T4"] }).to_string()).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let r = api.post("/compose", json!({ "models": ["west", "north"] }).to_string()).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn unknown_trace_and_job_are_404() {
    let api = Api::new();
    assert_eq!(api.get("/traces/trace-9.csv").await.status, StatusCode::NOT_FOUND);
    assert_eq!(api.get("/jobs/job-9").await.status, StatusCode::NOT_FOUND);
    assert_eq!(api.get("/reports/report-9").await.status, StatusCode::NOT_FOUND);
}
