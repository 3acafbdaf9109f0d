//! HTTP facade over the sanitization operations.
//!
//! `POST /sanitize/{op}` takes a trajectory or a mobility profile as JSON and
//! answers with the sanitized trajectory (or an array of them for a profile).
//! `op` is a mode name (`moderate_cloak`) or an operation name (`cloak`).

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::net::TcpListener;

use crate::model::{MobilityProfile, Trajectory};
use crate::privacy::{apply, OpParams, PrivacyMode, SanitizedTrajectory};

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn healthz() -> &'static str {
    "ok"
}

async fn sanitize(State(params): State<Arc<OpParams>>, Path(op): Path<String>, body: Bytes) -> Response {
    let Ok(mode) = op.parse::<PrivacyMode>() else {
        return error(StatusCode::NOT_FOUND, format!("unknown operation {op:?}"));
    };
    let value: Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let result = if value.get("trajectories").is_some() {
        serde_json::from_value::<MobilityProfile>(value).map_err(|e| e.to_string()).and_then(|p| {
            p.trajectories()
                .iter()
                .map(|t| apply(mode, t, &params))
                .collect::<crate::Result<Vec<SanitizedTrajectory>>>()
                .map(|v| json!(v))
                .map_err(|e| e.to_string())
        })
    } else {
        serde_json::from_value::<Trajectory>(value)
            .map_err(|e| e.to_string())
            .and_then(|t| apply(mode, &t, &params).map(|s| json!(s)).map_err(|e| e.to_string()))
    };
    match result {
        Ok(v) => Json(v).into_response(),
        Err(e) => error(StatusCode::BAD_REQUEST, e),
    }
}

pub fn router(params: OpParams) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sanitize/{op}", post(sanitize))
        .with_state(Arc::new(params))
}

/// Serve on an already bound listener until the task is dropped.
pub async fn serve(listener: TcpListener, params: OpParams) -> std::io::Result<()> {
    axum::serve(listener, router(params)).await
}

pub async fn serve_http(addr: SocketAddr, params: OpParams) -> std::io::Result<()> {
    serve(TcpListener::bind(addr).await?, params).await
}
