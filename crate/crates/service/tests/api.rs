use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use park_core::{RiskReport, SessionManifest, SessionStatus, TaskKind};
use park_service::api::{router, AppState, RouterOptions};
use park_service::pipeline::Analyzer;
use park_service::store::SessionStore;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqwest::{Method, StatusCode};
use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn golden(task: TaskKind) -> Vec<u8> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden");
    std::fs::read(dir.join(format!("{}.{}", task, task.artifact_extension()))).unwrap()
}

struct TestServer {
    base: String,
    client: reqwest::Client,
}

impl TestServer {
    async fn start(store_root: &Path, max_upload_bytes: usize) -> TestServer {
        let analyzer = Analyzer::load(&data("model.json"), &data("resources.json")).unwrap();
        let state = Arc::new(AppState { store: SessionStore::new(store_root), analyzer, max_upload_bytes });
        let opts = RouterOptions { request_timeout: Duration::from_secs(60), cors_origins: vec!["http://ui.test".into()] };
        let app = router(state, &opts);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
        TestServer { base: format!("http://{addr}"), client: reqwest::Client::new() }
    }

    async fn call(&self, method: Method, path: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
        let resp = self.client.request(method, format!("{}{path}", self.base)).body(body).send().await.unwrap();
        (resp.status(), resp.bytes().await.unwrap().to_vec())
    }

    async fn create(&self) -> String {
        let (status, body) = self.call(Method::POST, "/api/v1/sessions", vec![]).await;
        assert_eq!(status, StatusCode::CREATED);
        serde_json::from_slice::<Value>(&body).unwrap()["session_id"].as_str().unwrap().to_string()
    }
}

fn error_code(body: &[u8]) -> String {
    let v: Value = serde_json::from_slice(body).unwrap();
    assert!(v["detail"].is_string());
    v["error"].as_str().unwrap().to_string()
}

/// A body that deserializes and re-serializes to the same JSON conforms.
fn conforms<T: serde::de::DeserializeOwned + serde::Serialize>(body: &[u8]) -> bool {
    let Ok(raw) = serde_json::from_slice::<Value>(body) else { return false };
    match serde_json::from_value::<T>(raw.clone()) {
        Ok(t) => serde_json::to_value(t).unwrap() == raw,
        Err(_) => false,
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn upload_analyze_report_lifecycle() {
    let tmp = tempfile::tempdir().unwrap();
    let s = TestServer::start(tmp.path(), 1 << 20).await;
    assert_eq!(s.call(Method::GET, "/healthz", vec![]).await.0, StatusCode::OK);

    let id = s.create().await;
    let (status, body) = s.call(Method::GET, &format!("/api/v1/sessions/{id}/report"), vec![]).await;
    assert_eq!((status, error_code(&body).as_str()), (StatusCode::NOT_FOUND, "not_analyzed"));
    let (status, body) = s.call(Method::POST, &format!("/api/v1/sessions/{id}/analyze"), vec![]).await;
    assert_eq!((status, error_code(&body).as_str()), (StatusCode::CONFLICT, "not_ready"));

    for task in TaskKind::ALL {
        let (status, body) = s.call(Method::PUT, &format!("/api/v1/sessions/{id}/tasks/{task}"), golden(task)).await;
        assert_eq!(status, StatusCode::NO_CONTENT, "{task}: {}", String::from_utf8_lossy(&body));
    }
    // re-upload replaces
    let (status, _) = s.call(Method::PUT, &format!("/api/v1/sessions/{id}/tasks/speech"), golden(TaskKind::Speech)).await;
    assert_eq!(status, StatusCode::NO_CONTENT);

    let (status, body) = s.call(Method::GET, &format!("/api/v1/sessions/{id}"), vec![]).await;
    assert_eq!(status, StatusCode::OK);
    assert!(conforms::<SessionManifest>(&body));
    let m: SessionManifest = serde_json::from_slice(&body).unwrap();
    assert!(m.is_full());

    let (status, report) = s.call(Method::POST, &format!("/api/v1/sessions/{id}/analyze"), vec![]).await;
    assert_eq!(status, StatusCode::OK);
    assert!(conforms::<RiskReport>(&report));
    assert_eq!(serde_json::from_slice::<RiskReport>(&report).unwrap().modality_scores.len(), 3);
    let (status, stored) = s.call(Method::GET, &format!("/api/v1/sessions/{id}/report"), vec![]).await;
    assert_eq!((status, &stored), (StatusCode::OK, &report));
    assert_eq!(std::fs::read(tmp.path().join(&id).join("report.json")).unwrap(), report);

    let (status, body) = s.call(Method::PUT, &format!("/api/v1/sessions/{id}/tasks/speech"), golden(TaskKind::Speech)).await;
    assert_eq!((status, error_code(&body).as_str()), (StatusCode::CONFLICT, "session_closed"));
    let (_, body) = s.call(Method::GET, &format!("/api/v1/sessions/{id}"), vec![]).await;
    assert_eq!(serde_json::from_slice::<SessionManifest>(&body).unwrap().status, SessionStatus::Complete);
}

#[tokio::test(flavor = "multi_thread")]
async fn error_statuses() {
    let tmp = tempfile::tempdir().unwrap();
    let s = TestServer::start(tmp.path(), 64 * 1024).await;
    let id = s.create().await;

    let (status, body) = s.call(Method::PUT, &format!("/api/v1/sessions/{id}/tasks/juggling"), b"x".to_vec()).await;
    assert_eq!((status, error_code(&body).as_str()), (StatusCode::BAD_REQUEST, "invalid_task"));

    let (status, body) = s.call(Method::PUT, "/api/v1/sessions/nope/tasks/speech", golden(TaskKind::Speech)).await;
    assert_eq!((status, error_code(&body).as_str()), (StatusCode::NOT_FOUND, "unknown_session"));
    let (status, body) = s.call(Method::PUT, "/api/v1/sessions/..%2Fx/tasks/speech", b"x".to_vec()).await;
    assert_eq!((status, error_code(&body).as_str()), (StatusCode::NOT_FOUND, "unknown_session"));
    for path in ["/api/v1/sessions/nope", "/api/v1/sessions/nope/report"] {
        let (status, body) = s.call(Method::GET, path, vec![]).await;
        assert_eq!((status, error_code(&body).as_str()), (StatusCode::NOT_FOUND, "unknown_session"));
    }
    let (status, _) = s.call(Method::POST, "/api/v1/sessions/nope/analyze", vec![]).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    // a face track (468 points) where a hand (21) is expected
    let face: Vec<u8> = golden(TaskKind::FaceSmile).split(|b| *b == b'\n').take(5).collect::<Vec<_>>().join(&b'\n');
    let (status, body) = s.call(Method::PUT, &format!("/api/v1/sessions/{id}/tasks/motor_left"), face).await;
    assert_eq!((status, error_code(&body).as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "invalid_artifact"));
    let (status, _) = s.call(Method::PUT, &format!("/api/v1/sessions/{id}/tasks/speech"), b"not a wav".to_vec()).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, body) = s.call(Method::PUT, &format!("/api/v1/sessions/{id}/tasks/speech"), vec![0; 64 * 1024 + 1]).await;
    assert_eq!((status, error_code(&body).as_str()), (StatusCode::PAYLOAD_TOO_LARGE, "payload_too_large"));

    let (status, body) = s.call(Method::POST, "/api/v1/sessions", b"{\"colour\": 1}".to_vec()).await;
    assert_eq!((status, error_code(&body).as_str()), (StatusCode::BAD_REQUEST, "invalid_body"));

    // nothing above reached the manifest
    let (_, body) = s.call(Method::GET, &format!("/api/v1/sessions/{id}"), vec![]).await;
    assert!(serde_json::from_slice::<SessionManifest>(&body).unwrap().artifacts.is_empty());
}

#[tokio::test(flavor = "multi_thread")]
async fn create_with_region_and_participant() {
    let tmp = tempfile::tempdir().unwrap();
    let s = TestServer::start(tmp.path(), 1 << 20).await;
    let body = br#"{"participant": "p-17", "region_code": "US-NY"}"#.to_vec();
    let (status, body) = s.call(Method::POST, "/api/v1/sessions", body).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = serde_json::from_slice::<Value>(&body).unwrap()["session_id"].as_str().unwrap().to_string();
    let (_, body) = s.call(Method::GET, &format!("/api/v1/sessions/{id}"), vec![]).await;
    let m: SessionManifest = serde_json::from_slice(&body).unwrap();
    assert_eq!((m.participant.as_deref(), m.region_code.as_deref()), (Some("p-17"), Some("US-NY")));
}

#[tokio::test(flavor = "multi_thread")]
async fn unavailable_store_is_503() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("not-a-dir");
    std::fs::write(&file, b"").unwrap();
    let s = TestServer::start(&file, 1 << 20).await;
    let (status, body) = s.call(Method::POST, "/api/v1/sessions", vec![]).await;
    assert_eq!((status, error_code(&body).as_str()), (StatusCode::SERVICE_UNAVAILABLE, "store_unavailable"));
    let (status, _) = s.call(Method::GET, "/api/v1/sessions/abc", vec![]).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
}

#[tokio::test(flavor = "multi_thread")]
async fn cors_allows_configured_origin_only() {
    let tmp = tempfile::tempdir().unwrap();
    let s = TestServer::start(tmp.path(), 1 << 20).await;
    for (origin, allowed) in [("http://ui.test", true), ("http://evil.test", false)] {
        let resp = s
            .client
            .request(Method::OPTIONS, format!("{}/api/v1/sessions", s.base))
            .header("Origin", origin)
            .header("Access-Control-Request-Method", "POST")
            .send()
            .await
            .unwrap();
        let header = resp.headers().get("access-control-allow-origin").map(|v| v.to_str().unwrap().to_string());
        assert_eq!(header.as_deref() == Some(origin), allowed, "{origin}");
    }
}

/// Random operation sequences: every 2xx body conforms to its schema.
#[tokio::test(flavor = "multi_thread")]
async fn successful_responses_always_conform() {
    let tmp = tempfile::tempdir().unwrap();
    let s = TestServer::start(tmp.path(), 1 << 20).await;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut ids = vec![s.create().await];
    for _ in 0..60 {
        let id = ids[rng.random_range(0..ids.len())].clone();
        match rng.random_range(0..5) {
            0 => ids.push(s.create().await),
            1 => {
                let task = TaskKind::ALL[rng.random_range(0..6)];
                let (status, body) = s.call(Method::PUT, &format!("/api/v1/sessions/{id}/tasks/{task}"), golden(task)).await;
                assert!(status == StatusCode::NO_CONTENT || status == StatusCode::CONFLICT, "{status}");
                assert!(body.is_empty() || error_code(&body) == "session_closed");
            }
            2 => {
                let (status, body) = s.call(Method::POST, &format!("/api/v1/sessions/{id}/analyze"), vec![]).await;
                if status.is_success() {
                    assert!(conforms::<RiskReport>(&body));
                }
            }
            3 => {
                let (status, body) = s.call(Method::GET, &format!("/api/v1/sessions/{id}/report"), vec![]).await;
                if status.is_success() {
                    assert!(conforms::<RiskReport>(&body));
                }
            }
            _ => {
                let (status, body) = s.call(Method::GET, &format!("/api/v1/sessions/{id}"), vec![]).await;
                assert!(status.is_success() && conforms::<SessionManifest>(&body));
            }
        }
    }
}
