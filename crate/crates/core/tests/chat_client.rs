use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use decompcheck::backends::{BackendError, ChatBackend, ChatConfig, GenerationParams, RetryPolicy};

#[derive(Clone)]
struct Stub {
    hits: Arc<AtomicUsize>,
    /// Status codes to answer with before succeeding.
    failures: Arc<Vec<u16>>,
    seen: Arc<std::sync::Mutex<Vec<(Value, Option<String>)>>>,
}

async fn handler(State(stub): State<Stub>, headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    let n = stub.hits.fetch_add(1, Ordering::SeqCst);
    let auth = headers
        .get("authorization")
        .map(|v| v.to_str().unwrap().to_string());
    stub.seen.lock().unwrap().push((body.clone(), auth));
    if let Some(&code) = stub.failures.get(n) {
        return (StatusCode::from_u16(code).unwrap(), Json(json!({"error": "stub"})));
    }
    let prompt = body["messages"][0]["content"].as_str().unwrap_or_default();
    let content = if prompt.contains("ECHO") { prompt.to_string() } else { "Veracity: T.".to_string() };
    (
        StatusCode::OK,
        Json(json!({
            "choices": [{"message": {"role": "assistant", "content": content}}],
            "usage": {"prompt_tokens": 3, "completion_tokens": 4}
        })),
    )
}

async fn serve(failures: Vec<u16>) -> (String, Stub) {
    let stub = Stub {
        hits: Arc::new(AtomicUsize::new(0)),
        failures: Arc::new(failures),
        seen: Arc::default(),
    };
    let app = Router::new()
        .route("/v1/chat/completions", post(handler))
        .with_state(stub.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}/v1/chat/completions"), stub)
}

fn backend(url: &str, max_retries: u32) -> ChatBackend {
    let mut config = ChatConfig::new(url);
    config.retry = RetryPolicy {
        max_retries,
        base_delay: Duration::from_millis(1),
        max_delay: Duration::from_millis(5),
    };
    let params = GenerationParams {
        model_name: "stub-model".into(),
        ..Default::default()
    };
    ChatBackend::with_api_key(config, params, Some("secret-token".into())).unwrap()
}

#[tokio::test]
async fn echo_returns_first_choice_text() {
    let (url, stub) = serve(vec![]).await;
    let r = backend(&url, 3).complete("ECHO Veracity: T.").await.unwrap();
    assert!(r.raw_text.contains("Veracity: T."));
    assert_eq!(r.attempts, 1);
    assert_eq!(r.usage.unwrap().completion_tokens, 4);

    let seen = stub.seen.lock().unwrap();
    let (body, auth) = &seen[0];
    assert_eq!(auth.as_deref(), Some("Bearer secret-token"));
    assert_eq!(body["model"], "stub-model");
    assert_eq!(body["temperature"], 0.3);
    assert_eq!(body["top_p"], 0.75);
    assert_eq!(body["top_k"], 50);
    assert_eq!(body["max_tokens"], 8172);
}

#[tokio::test]
async fn two_server_errors_then_success() {
    let (url, stub) = serve(vec![500, 500]).await;
    let r = backend(&url, 3).complete("x").await.unwrap();
    assert_eq!(r.raw_text, "Veracity: T.");
    assert_eq!(r.attempts, 3);
    assert_eq!(stub.hits.load(Ordering::SeqCst), 3);
}

#[tokio::test]
async fn rate_limited_then_success() {
    let (url, stub) = serve(vec![429]).await;
    backend(&url, 1).complete("x").await.unwrap();
    assert_eq!(stub.hits.load(Ordering::SeqCst), 2);
}

#[tokio::test]
async fn unauthorized_is_not_retried() {
    let (url, stub) = serve(vec![401, 401, 401]).await;
    let err = backend(&url, 5).complete("x").await.unwrap_err();
    assert!(matches!(err, BackendError::Auth { status: 401 }), "{err}");
    assert_eq!(stub.hits.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn other_client_errors_are_not_retried() {
    let (url, stub) = serve(vec![400]).await;
    let err = backend(&url, 5).complete("x").await.unwrap_err();
    assert!(matches!(err, BackendError::Status { status: 400, .. }));
    assert_eq!(stub.hits.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn retries_exhausted() {
    let (url, stub) = serve(vec![503; 10]).await;
    let err = backend(&url, 2).complete("x").await.unwrap_err();
    match err {
        BackendError::RetryExhausted { attempts, last } => {
            assert_eq!(attempts, 3);
            assert!(matches!(*last, BackendError::Status { status: 503, .. }));
        }
        other => panic!("{other}"),
    }
    assert_eq!(stub.hits.load(Ordering::SeqCst), 3);
}

#[tokio::test]
async fn network_error_is_retried_then_exhausted() {
    // nothing listens on this port once the listener is dropped
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    drop(listener);
    let err = backend(&url, 1).complete("x").await.unwrap_err();
    match err {
        BackendError::RetryExhausted { attempts: 2, last } => assert!(matches!(*last, BackendError::Network(_))),
        other => panic!("{other}"),
    }
}

#[tokio::test]
async fn identical_requests_are_reproducible() {
    let (url, _) = serve(vec![]).await;
    let b = backend(&url, 0);
    let a = b.complete("ECHO same prompt").await.unwrap().raw_text;
    let c = b.complete("ECHO same prompt").await.unwrap().raw_text;
    assert_eq!(a.as_bytes(), c.as_bytes());
}

#[tokio::test]
async fn malformed_body_fails() {
    async fn bad() -> &'static str {
        "{\"choices\": []}"
    }
    let app = Router::new().route("/", post(bad));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    let err = backend(&format!("http://{addr}/"), 3).complete("x").await.unwrap_err();
    assert!(matches!(err, BackendError::Malformed(_)));
}
