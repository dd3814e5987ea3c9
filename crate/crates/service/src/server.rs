//! HTTP and WebSocket front end.
//!
//! Routes:
//!
//! - `GET /ws` – WebSocket, JSON text frames (see `blinkscribe_core::wire`)
//! - `GET /api/snapshot` – current snapshot
//! - `POST /api/command` – one client message; 200 with a snapshot,
//!   204 when applied, 400 with an error message when rejected
//! - `GET /api/suggest?prefix=<digits>&k=<n>` – one-shot trie query
//! - `GET /healthz`

use std::future::Future;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use blinkscribe_core::predict::{is_code, SearchBudget, Suggestion, T6Predictor};
use blinkscribe_core::wire::{ClientMessage, ServerMessage, Snapshot};
use futures::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tracing::debug;

use crate::session::LoopEvent;

#[derive(Clone)]
pub(crate) struct AppState {
    pub(crate) commands: mpsc::Sender<LoopEvent>,
    pub(crate) snapshots: watch::Receiver<Arc<Snapshot>>,
    pub(crate) events: broadcast::Sender<ServerMessage>,
    pub(crate) predictor: Arc<T6Predictor>,
}

impl AppState {
    /// Sends a command through the loop's queue and waits for its answer.
    async fn dispatch(&self, cmd: ClientMessage) -> Result<Option<Snapshot>, ServerMessage> {
        let (reply, rx) = oneshot::channel();
        let gone = || ServerMessage::Error {
            message: "session is shutting down".into(),
        };
        self.commands
            .send(LoopEvent::Client { cmd, reply })
            .await
            .map_err(|_| gone())?;
        rx.await.map_err(|_| gone())?.map_err(ServerMessage::from)
    }
}

pub(crate) fn router(state: AppState) -> Router {
    Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/api/snapshot", get(get_snapshot))
        .route("/api/command", post(post_command))
        .route("/api/suggest", get(get_suggest))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(state)
}

pub(crate) async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client_loop(socket, state))
}

async fn client_loop(socket: WebSocket, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    let mut snapshots = state.snapshots.clone();
    let mut events = state.events.subscribe();

    let first = ServerMessage::Snapshot((**snapshots.borrow_and_update()).clone());
    if sink
        .send(Message::Text(first.to_json().into()))
        .await
        .is_err()
    {
        return;
    }
    loop {
        let outgoing = tokio::select! {
            changed = snapshots.changed() => match changed {
                Ok(()) => ServerMessage::Snapshot((**snapshots.borrow_and_update()).clone()),
                Err(_) => break,
            },
            ev = events.recv() => match ev {
                Ok(msg) => msg,
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    debug!(skipped = n, "client lagging behind events");
                    continue;
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            frame = stream.next() => match frame {
                Some(Ok(Message::Text(text))) => match ClientMessage::parse(&text) {
                    Ok(cmd) => match state.dispatch(cmd).await {
                        Ok(Some(snap)) => ServerMessage::Snapshot(snap),
                        Ok(None) => continue,
                        Err(err) => err,
                    },
                    Err(err) => err.into(),
                },
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => continue,
            },
        };
        if sink
            .send(Message::Text(outgoing.to_json().into()))
            .await
            .is_err()
        {
            break;
        }
    }
    let _ = sink.close().await;
}

async fn get_snapshot(State(state): State<AppState>) -> Response {
    match state.dispatch(ClientMessage::GetSnapshot).await {
        Ok(Some(snap)) => Json(ServerMessage::Snapshot(snap)).into_response(),
        Ok(None) => StatusCode::NO_CONTENT.into_response(),
        Err(err) => (StatusCode::SERVICE_UNAVAILABLE, Json(err)).into_response(),
    }
}

async fn post_command(State(state): State<AppState>, body: String) -> Response {
    let cmd = match ClientMessage::parse(&body) {
        Ok(cmd) => cmd,
        Err(err) => {
            return (StatusCode::BAD_REQUEST, Json(ServerMessage::from(err))).into_response()
        }
    };
    match state.dispatch(cmd).await {
        Ok(Some(snap)) => Json(ServerMessage::Snapshot(snap)).into_response(),
        Ok(None) => StatusCode::NO_CONTENT.into_response(),
        Err(err) => (StatusCode::BAD_REQUEST, Json(err)).into_response(),
    }
}

#[derive(Debug, Deserialize)]
struct SuggestQuery {
    prefix: String,
    k: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SuggestResponse {
    pub prefix: String,
    pub suggestions: Vec<Suggestion>,
}

async fn get_suggest(State(state): State<AppState>, Query(q): Query<SuggestQuery>) -> Response {
    if !is_code(&q.prefix) {
        let err = ServerMessage::Error {
            message: format!("prefix {:?} must use digits 1-6", q.prefix),
        };
        return (StatusCode::BAD_REQUEST, Json(err)).into_response();
    }
    let k = q.k.unwrap_or(state.predictor.num_words()).max(1);
    let suggestions = state
        .predictor
        .trie()
        .suggest(&q.prefix, SearchBudget::unbounded(k));
    Json(SuggestResponse {
        prefix: q.prefix,
        suggestions,
    })
    .into_response()
}
