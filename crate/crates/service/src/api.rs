use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::stream;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast::error::RecvError;

use crate::error::ApiError;
use crate::record::{BallotEvent, CreateSession, Submission, Transcript};
use crate::store::Store;

type AppState = Arc<Store>;

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/import", post(import))
        .route("/sessions/{id}", get(status))
        .route("/sessions/{id}/ballots", post(submit))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/export", get(export))
        .with_state(store)
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn create(
    State(store): State<AppState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<Response, ApiError> {
    let request = body(payload)?;
    // Simulated beta can take a while.
    let status = blocking(move || store.create(request)).await?;
    Ok((StatusCode::CREATED, Json(status)).into_response())
}

async fn import(
    State(store): State<AppState>,
    payload: Result<Json<Transcript>, JsonRejection>,
) -> Result<Response, ApiError> {
    let transcript = body(payload)?;
    let status = blocking(move || store.import(transcript)).await?;
    Ok((StatusCode::CREATED, Json(status)).into_response())
}

#[derive(Serialize)]
struct SessionList {
    sessions: Vec<String>,
}

async fn list(State(store): State<AppState>) -> Json<SessionList> {
    Json(SessionList {
        sessions: store.session_ids(),
    })
}

async fn status(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(store.status(&id)?.as_ref().clone()).into_response())
}

async fn submit(
    State(store): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<Submission>, JsonRejection>,
) -> Result<Response, ApiError> {
    let sub = body(payload)?;
    Ok(Json(store.submit(&id, sub)?).into_response())
}

#[derive(Deserialize)]
struct Since {
    #[serde(default)]
    since: u64,
}

#[derive(Serialize)]
struct EventPage {
    events: Vec<BallotEvent>,
    next_sequence_no: u64,
}

/// Incremental JSON by default; a server-sent event stream when the client
/// asks for `text/event-stream`.
async fn events(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Query(Since { since }): Query<Since>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let wants_stream = headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("text/event-stream"));
    if wants_stream {
        let rx = store.subscribe(&id)?;
        let updates = stream::unfold(rx, |mut rx| async move {
            loop {
                match rx.recv().await {
                    Ok(msg) => {
                        let event = Event::default()
                            .event("ballot")
                            .id(msg.event.sequence_no.to_string())
                            .json_data(msg.as_ref())
                            .unwrap_or_else(|_| Event::default().comment("unserializable"));
                        return Some((Ok::<_, Infallible>(event), rx));
                    }
                    // A slow reader resynchronizes from GET /sessions/{id}.
                    Err(RecvError::Lagged(_)) => continue,
                    Err(RecvError::Closed) => return None,
                }
            }
        });
        return Ok(Sse::new(updates).keep_alive(KeepAlive::default()).into_response());
    }
    let events = store.events_since(&id, since)?;
    let next_sequence_no = store.status(&id)?.next_sequence_no;
    Ok(Json(EventPage {
        events,
        next_sequence_no,
    })
    .into_response())
}

async fn export(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(store.export(&id)?).into_response())
}
