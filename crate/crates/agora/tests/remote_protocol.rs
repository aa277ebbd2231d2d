//! The HTTP client against a local stand-in service.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use agora::core::oracle::{GenerateRequest, Oracle, OracleError, ScoreRequest};
use agora::core::rng::SimRng;
use agora::core::DecodingProfile;
use agora::remote::{RemoteOracle, RemoteSettings};
use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use rand::SeedableRng;
use serde_json::{json, Value};

#[derive(Default)]
struct Service {
    bodies: Mutex<Vec<Value>>,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
}

type Shared = Arc<Service>;

async fn score(State(s): State<Shared>, Json(body): Json<Value>) -> Json<Value> {
    s.calls.fetch_add(1, Ordering::SeqCst);
    let n = body["continuations"].as_array().map_or(0, |a| a.len());
    s.bodies.lock().unwrap().push(body);
    Json(json!({ "perplexities": (0..n).map(|i| 2.0 + i as f64).collect::<Vec<_>>() }))
}

async fn generate(State(s): State<Shared>, Json(body): Json<Value>) -> Json<Value> {
    s.calls.fetch_add(1, Ordering::SeqCst);
    s.bodies.lock().unwrap().push(body);
    Json(json!({ "text": "Legalization would reduce harm." }))
}

async fn unavailable(State(s): State<Shared>) -> (StatusCode, &'static str) {
    s.calls.fetch_add(1, Ordering::SeqCst);
    (StatusCode::SERVICE_UNAVAILABLE, "model loading")
}

async fn bad_request(State(s): State<Shared>) -> (StatusCode, &'static str) {
    s.calls.fetch_add(1, Ordering::SeqCst);
    (StatusCode::BAD_REQUEST, "context too long")
}

async fn short_reply() -> Json<Value> {
    Json(json!({ "perplexities": [3.0] }))
}

async fn garbage() -> &'static str {
    "not json"
}

async fn slow(State(s): State<Shared>) -> Json<Value> {
    s.calls.fetch_add(1, Ordering::SeqCst);
    tokio::time::sleep(Duration::from_millis(1500)).await;
    Json(json!({ "perplexities": [1.0] }))
}

async fn flaky(State(s): State<Shared>, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    let n = body["continuations"].as_array().map_or(0, |a| a.len());
    if s.calls.fetch_add(1, Ordering::SeqCst) < 2 {
        (StatusCode::BAD_GATEWAY, Json(json!({})))
    } else {
        (StatusCode::OK, Json(json!({ "perplexities": vec![5.0; n] })))
    }
}

async fn crowded(State(s): State<Shared>) -> Json<Value> {
    let now = s.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    s.peak.fetch_max(now, Ordering::SeqCst);
    tokio::time::sleep(Duration::from_millis(50)).await;
    s.in_flight.fetch_sub(1, Ordering::SeqCst);
    Json(json!({ "perplexities": [1.0] }))
}

fn spawn_service() -> (SocketAddr, Shared) {
    let shared: Shared = Arc::default();
    let app = Router::new()
        .route("/ok/score", post(score))
        .route("/ok/generate", post(generate))
        .route("/down/score", post(unavailable))
        .route("/reject/score", post(bad_request))
        .route("/short/score", post(short_reply))
        .route("/garbage/generate", post(garbage))
        .route("/slow/score", post(slow))
        .route("/flaky/score", post(flaky))
        .route("/crowded/score", post(crowded))
        .with_state(shared.clone());
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    (rx.recv().unwrap(), shared)
}

fn settings() -> RemoteSettings {
    RemoteSettings { retries: 0, retry_backoff_ms: 1, ..RemoteSettings::default() }
}

fn request(n: usize) -> ScoreRequest {
    ScoreRequest::new("Some context.", (0..n).map(|i| format!("claim {i}")).collect()).unwrap()
}

#[test]
fn score_sends_context_and_continuations() {
    let (addr, svc) = spawn_service();
    let oracle = RemoteOracle::new(&format!("http://{addr}/ok/"), settings()).unwrap();
    assert_eq!(oracle.score(&request(3)).unwrap(), vec![2.0, 3.0, 4.0]);
    let body = svc.bodies.lock().unwrap()[0].clone();
    assert_eq!(body, json!({ "context": "Some context.", "continuations": ["claim 0", "claim 1", "claim 2"] }));
}

#[test]
fn generate_sends_decoding_fields() {
    let (addr, svc) = spawn_service();
    let oracle = RemoteOracle::new(&format!("http://{addr}/ok"), settings()).unwrap();
    let params = DecodingProfile::Creative.default_params();
    let req = GenerateRequest { prompt: "Write.".into(), params };
    let text = oracle.generate(&req, &mut SimRng::seed_from_u64(0)).unwrap();
    assert_eq!(text, "Legalization would reduce harm.");
    let body = svc.bodies.lock().unwrap()[0].clone();
    let keys: Vec<&str> = body.as_object().unwrap().keys().map(String::as_str).collect();
    let mut expected = vec![
        "max_new_tokens",
        "num_beams",
        "prompt",
        "repetition_penalty",
        "sampling",
        "temperature",
        "top_p",
    ];
    expected.sort();
    let mut keys = keys;
    keys.sort();
    assert_eq!(keys, expected);
    assert_eq!(body["temperature"], json!(params.temperature));
    assert_eq!(body["top_p"], json!(params.top_p));
    assert_eq!(body["num_beams"], json!(params.num_beams));
    assert_eq!(body["sampling"], json!(params.sampling));
    assert_eq!(body["max_new_tokens"], json!(params.max_new_tokens));
}

#[test]
fn client_errors_are_reported_without_retry() {
    let (addr, svc) = spawn_service();
    let oracle = RemoteOracle::new(&format!("http://{addr}/reject"), RemoteSettings { retries: 3, ..settings() }).unwrap();
    let err = oracle.score(&request(1)).unwrap_err();
    assert_eq!(err, OracleError::Status { code: 400, message: "context too long".into() });
    assert_eq!(svc.calls.load(Ordering::SeqCst), 1);
}

#[test]
fn server_errors_are_retried_then_reported() {
    let (addr, svc) = spawn_service();
    let oracle = RemoteOracle::new(&format!("http://{addr}/down"), RemoteSettings { retries: 2, ..settings() }).unwrap();
    let err = oracle.score(&request(1)).unwrap_err();
    assert!(matches!(err, OracleError::Status { code: 503, .. }));
    assert_eq!(svc.calls.load(Ordering::SeqCst), 3);
}

#[test]
fn transient_failures_recover() {
    let (addr, svc) = spawn_service();
    let oracle = RemoteOracle::new(&format!("http://{addr}/flaky"), RemoteSettings { retries: 2, ..settings() }).unwrap();
    assert_eq!(oracle.score(&request(2)).unwrap(), vec![5.0, 5.0]);
    assert_eq!(svc.calls.load(Ordering::SeqCst), 3);
}

#[test]
fn malformed_replies() {
    let (addr, _svc) = spawn_service();
    let short = RemoteOracle::new(&format!("http://{addr}/short"), settings()).unwrap();
    assert!(matches!(short.score(&request(2)), Err(OracleError::Malformed(_))));
    let garbage = RemoteOracle::new(&format!("http://{addr}/garbage"), settings()).unwrap();
    let req = GenerateRequest { prompt: "x".into(), params: DecodingProfile::Narrow.default_params() };
    assert!(matches!(garbage.generate(&req, &mut SimRng::seed_from_u64(0)), Err(OracleError::Malformed(_))));
}

#[test]
fn slow_service_times_out() {
    let (addr, svc) = spawn_service();
    let oracle =
        RemoteOracle::new(&format!("http://{addr}/slow"), RemoteSettings { timeout_secs: 0.2, ..settings() }).unwrap();
    assert_eq!(oracle.score(&request(1)), Err(OracleError::Timeout));
    assert_eq!(svc.calls.load(Ordering::SeqCst), 1);
}

#[test]
fn unreachable_service_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let oracle = RemoteOracle::new(&format!("http://{addr}"), settings()).unwrap();
    assert!(matches!(oracle.score(&request(1)), Err(OracleError::Transport(_))));
}

#[test]
fn concurrency_is_capped() {
    let (addr, svc) = spawn_service();
    let oracle =
        RemoteOracle::new(&format!("http://{addr}/crowded"), RemoteSettings { max_in_flight: 2, ..settings() }).unwrap();
    std::thread::scope(|s| {
        for _ in 0..8 {
            s.spawn(|| oracle.score(&request(1)).unwrap());
        }
    });
    assert!(svc.peak.load(Ordering::SeqCst) <= 2);
    assert!(svc.peak.load(Ordering::SeqCst) >= 1);
}

#[test]
fn rejects_nonpositive_timeout() {
    let bad = RemoteSettings { timeout_secs: 0.0, ..settings() };
    assert!(matches!(RemoteOracle::new("http://127.0.0.1:1", bad), Err(OracleError::InvalidInput(_))));
}
