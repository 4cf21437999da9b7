use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use lazyseq_core::store::SwapError;
use lazyseq_core::stream::{Control, ExecutionMode};
use lazyseq_core::syntax::Diagnostic;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::broadcast::error::RecvError;
use tower_http::services::ServeDir;

use crate::Hub;

pub const TOKEN_HEADER: &str = "x-conductor-token";

const PLACEHOLDER: &str = "<!doctype html>\n<title>lazyseq</title>\n<p>The session is running. \
Start the server with <code>--ui DIR</code> to serve the web client; the API lives under <code>/api</code>.</p>\n";

pub(crate) fn router(hub: Arc<Hub>) -> Router {
    let api = Router::new()
        .route("/api/modules", get(list_modules))
        .route("/api/modules/{name}", get(get_module).put(put_module))
        .route("/api/modules/{name}/editable", post(post_editable))
        .route("/api/control", post(control))
        .route("/api/snapshot", get(snapshot))
        .route("/api/feed", get(feed));
    let app = match &hub.ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER) })),
    };
    app.with_state(hub)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn rejected(status: StatusCode, diagnostics: Vec<Diagnostic>) -> Response {
    let body = json!({ "accepted": false, "diagnostics": diagnostics, "newVersion": null });
    (status, Json(body)).into_response()
}

fn swap_failure(err: SwapError) -> Response {
    match err {
        SwapError::Diagnostics(diags) => rejected(StatusCode::UNPROCESSABLE_ENTITY, diags),
        SwapError::NotFound(name) => error(StatusCode::NOT_FOUND, format!("no module named `{name}`")),
        SwapError::NoEditableRegion(name) => rejected(
            StatusCode::UNPROCESSABLE_ENTITY,
            vec![Diagnostic::new(name.clone(), 1, 1, format!("module `{name}` has no editable region"))],
        ),
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, Response> {
    serde_json::from_slice(body).map_err(|e| error(StatusCode::BAD_REQUEST, format!("bad request body: {e}")))
}

fn check_conductor(hub: &Hub, headers: &HeaderMap) -> Result<(), Response> {
    let given = headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok());
    match (&hub.token, given) {
        (Some(token), Some(given)) if token == given => Ok(()),
        _ => Err(error(StatusCode::UNAUTHORIZED, "conductor token required")),
    }
}

async fn list_modules(State(hub): State<Arc<Hub>>) -> Response {
    let store = hub.store.lock().unwrap();
    let modules: Vec<Value> = store
        .modules()
        .map(|m| json!({ "name": m.name, "version": m.version, "hasEditableRegion": m.has_editable_region() }))
        .collect();
    Json(modules).into_response()
}

async fn get_module(State(hub): State<Arc<Hub>>, Path(name): Path<String>) -> Response {
    let store = hub.store.lock().unwrap();
    match store.get_module(&name) {
        Ok(m) => Json(json!({
            "name": m.name,
            "protectedText": m.protected_text,
            "editableText": m.editable_text,
            "version": m.version,
        }))
        .into_response(),
        Err(err) => swap_failure(err),
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct EditableBody {
    editable_text: String,
    base_version: u64,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct FullBody {
    full_text: String,
    base_version: Option<u64>,
}

fn conflict(current: u64) -> Response {
    let body = json!({ "accepted": false, "diagnostics": [], "newVersion": null, "currentVersion": current });
    (StatusCode::CONFLICT, Json(body)).into_response()
}

fn accepted(hub: &Hub, name: &str, rules: Control, version: u64) -> Response {
    tracing::info!(module = name, version, "swap accepted");
    hub.send(rules);
    Json(json!({ "accepted": true, "diagnostics": [], "newVersion": version })).into_response()
}

async fn post_editable(State(hub): State<Arc<Hub>>, Path(name): Path<String>, body: Bytes) -> Response {
    let body: EditableBody = match parse_body(&body) {
        Ok(body) => body,
        Err(response) => return response,
    };
    // the lock is held until the new rules are queued, so swaps reach the
    // run loop in the order they were accepted
    let mut store = hub.store.lock().unwrap();
    let current = match store.get_module(&name) {
        Ok(m) => m.version,
        Err(err) => return swap_failure(err),
    };
    if body.base_version != current {
        return conflict(current);
    }
    match store.swap_editable(&name, &body.editable_text) {
        Ok(version) => accepted(&hub, &name, Control::Swap(store.rules().clone()), version),
        Err(err) => swap_failure(err),
    }
}

async fn put_module(
    State(hub): State<Arc<Hub>>,
    Path(name): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    if let Err(response) = check_conductor(&hub, &headers) {
        return response;
    }
    let body: FullBody = match parse_body(&body) {
        Ok(body) => body,
        Err(response) => return response,
    };
    let mut store = hub.store.lock().unwrap();
    if let (Some(base), Ok(m)) = (body.base_version, store.get_module(&name)) {
        if base != m.version {
            return conflict(m.version);
        }
    }
    match store.swap_module(&name, &body.full_text) {
        Ok(version) => accepted(&hub, &name, Control::Swap(store.rules().clone()), version),
        Err(err) => swap_failure(err),
    }
}

fn parse_mode(hub: &Hub, body: &Value) -> Result<ExecutionMode, String> {
    let pause = body.get("pauseMs").and_then(Value::as_u64).unwrap_or(hub.slow_pause_ms);
    match body.get("mode").and_then(Value::as_str) {
        Some("realtime") => Ok(ExecutionMode::Realtime),
        Some("slow") => Ok(ExecutionMode::SlowMotion { pause_ms: pause }),
        Some("step") => Ok(ExecutionMode::SingleStep),
        Some(other) => Err(format!("unknown mode `{other}`")),
        None => Err("setMode needs a mode: realtime, slow or step".into()),
    }
}

async fn control(State(hub): State<Arc<Hub>>, headers: HeaderMap, body: Bytes) -> Response {
    if let Err(response) = check_conductor(&hub, &headers) {
        return response;
    }
    let body: Value = match parse_body(&body) {
        Ok(body) => body,
        Err(response) => return response,
    };
    let mut mode = hub.mode.lock().unwrap();
    let control = match body.get("command").and_then(Value::as_str) {
        Some("setMode") => match parse_mode(&hub, &body) {
            Ok(new) => {
                *mode = new;
                Control::SetMode(new)
            }
            Err(message) => return error(StatusCode::BAD_REQUEST, message),
        },
        Some("pause") => Control::Pause,
        Some("resume") => Control::Resume,
        Some("step") if *mode == ExecutionMode::SingleStep => Control::Step,
        Some("step") => return error(StatusCode::BAD_REQUEST, "step is only valid in step mode"),
        Some("restart") => Control::Restart,
        Some("stop") => Control::Stop,
        Some(other) => return error(StatusCode::BAD_REQUEST, format!("unknown command `{other}`")),
        None => return error(StatusCode::BAD_REQUEST, "missing command"),
    };
    tracing::info!(?control, "control");
    hub.send(control);
    Json(json!({ "ok": true })).into_response()
}

async fn snapshot(State(hub): State<Arc<Hub>>) -> Response {
    Json(hub.feed.latest()).into_response()
}

async fn feed(State(hub): State<Arc<Hub>>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let (first, receiver) = hub.feed.subscribe();
    let stopped = hub.stopped.clone();
    let state = (Some(first), receiver, stopped);
    let events = stream::unfold(state, |(first, mut receiver, mut stopped)| async move {
        if let Some(first) = first {
            let event = Event::default().event("snapshot").data(&*first);
            return Some((Ok(event), (None, receiver, stopped)));
        }
        loop {
            let message = tokio::select! {
                message = receiver.recv() => message,
                _ = stopped.wait_for(|s| *s) => return None,
            };
            match message {
                Ok(json) => {
                    let event = Event::default().event("snapshot").data(&*json);
                    return Some((Ok(event), (None, receiver, stopped)));
                }
                // a slow subscriber skips ahead; the next snapshot is complete
                Err(RecvError::Lagged(_)) => continue,
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(events).keep_alive(KeepAlive::new().interval(Duration::from_secs(15)))
}
