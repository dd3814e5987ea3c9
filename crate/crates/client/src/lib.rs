//! Client for a running blinkscribe session.
//!
//! [`Client`] speaks the HTTP routes; [`LiveClient`] holds a WebSocket and
//! streams snapshots and events as they are published.

use std::net::SocketAddr;

use blinkscribe_core::predict::Suggestion;
use blinkscribe_core::wire::{ClientMessage, ServerMessage, Snapshot};
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use thiserror::Error;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
    #[error("websocket: {0}")]
    WebSocket(#[from] tokio_tungstenite::tungstenite::Error),
    #[error("bad message from server: {0}")]
    Decode(#[from] serde_json::Error),
    #[error("server rejected the request: {0}")]
    Rejected(String),
    #[error("unexpected reply: {0}")]
    Unexpected(String),
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

#[derive(Debug, Deserialize)]
struct SuggestReply {
    suggestions: Vec<Suggestion>,
}

impl Client {
    /// `server` is `host:port` or a full `http://` URL.
    pub fn new(server: &str) -> Self {
        let base = if server.starts_with("http://") || server.starts_with("https://") {
            server.trim_end_matches('/').to_string()
        } else {
            format!("http://{server}")
        };
        Self {
            base,
            http: reqwest::Client::new(),
        }
    }

    pub fn for_addr(addr: SocketAddr) -> Self {
        Self::new(&addr.to_string())
    }

    pub async fn health(&self) -> Result<bool> {
        let resp = self
            .http
            .get(format!("{}/healthz", self.base))
            .send()
            .await?;
        Ok(resp.status().is_success())
    }

    pub async fn snapshot(&self) -> Result<Snapshot> {
        let resp = self
            .http
            .get(format!("{}/api/snapshot", self.base))
            .send()
            .await?;
        match decode(resp).await? {
            Some(ServerMessage::Snapshot(s)) => Ok(s),
            other => Err(ClientError::Unexpected(format!("{other:?}"))),
        }
    }

    /// Sends one command. Returns the snapshot for `get_snapshot`, `None`
    /// for commands whose effect arrives through the snapshot stream.
    pub async fn command(&self, cmd: &ClientMessage) -> Result<Option<Snapshot>> {
        let resp = self
            .http
            .post(format!("{}/api/command", self.base))
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(serde_json::to_string(cmd)?)
            .send()
            .await?;
        match decode(resp).await? {
            None => Ok(None),
            Some(ServerMessage::Snapshot(s)) => Ok(Some(s)),
            Some(other) => Err(ClientError::Unexpected(format!("{other:?}"))),
        }
    }

    pub async fn suggest(&self, prefix: &str, k: usize) -> Result<Vec<Suggestion>> {
        let resp = self
            .http
            .get(format!("{}/api/suggest", self.base))
            .query(&[("prefix", prefix.to_string()), ("k", k.to_string())])
            .send()
            .await?;
        let status = resp.status();
        let body = resp.text().await?;
        if !status.is_success() {
            return Err(rejection(&body));
        }
        Ok(serde_json::from_str::<SuggestReply>(&body)?.suggestions)
    }

    pub fn ws_url(&self) -> String {
        let rest = self
            .base
            .strip_prefix("http")
            .expect("base always starts with http");
        format!("ws{rest}/ws")
    }
}

async fn decode(resp: reqwest::Response) -> Result<Option<ServerMessage>> {
    let status = resp.status();
    if status == reqwest::StatusCode::NO_CONTENT {
        return Ok(None);
    }
    let body = resp.text().await?;
    if !status.is_success() {
        return Err(rejection(&body));
    }
    Ok(Some(serde_json::from_str(&body)?))
}

fn rejection(body: &str) -> ClientError {
    match serde_json::from_str::<ServerMessage>(body) {
        Ok(ServerMessage::Error { message }) => ClientError::Rejected(message),
        _ => ClientError::Rejected(body.to_string()),
    }
}

/// A WebSocket connection to the session.
pub struct LiveClient {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
}

impl LiveClient {
    pub async fn connect(server: &str) -> Result<Self> {
        let url = Client::new(server).ws_url();
        let (ws, _) = tokio_tungstenite::connect_async(url).await?;
        Ok(Self { ws })
    }

    pub async fn send(&mut self, cmd: &ClientMessage) -> Result<()> {
        self.send_raw(&serde_json::to_string(cmd)?).await
    }

    /// Sends a text frame verbatim.
    pub async fn send_raw(&mut self, text: &str) -> Result<()> {
        self.ws.send(Message::text(text)).await?;
        Ok(())
    }

    /// Next message from the server; `None` once the session closes.
    pub async fn next(&mut self) -> Option<Result<ServerMessage>> {
        loop {
            match self.ws.next().await? {
                Ok(Message::Text(text)) => {
                    return Some(serde_json::from_str(text.as_str()).map_err(Into::into))
                }
                Ok(Message::Close(_)) => return None,
                Ok(_) => continue,
                Err(e) => return Some(Err(e.into())),
            }
        }
    }

    /// Reads until a snapshot satisfying `pred` arrives.
    pub async fn wait_for(&mut self, mut pred: impl FnMut(&Snapshot) -> bool) -> Result<Snapshot> {
        while let Some(msg) = self.next().await {
            if let ServerMessage::Snapshot(s) = msg? {
                if pred(&s) {
                    return Ok(s);
                }
            }
        }
        Err(ClientError::Unexpected("connection closed".into()))
    }

    pub async fn close(mut self) -> Result<()> {
        self.ws.close(None).await?;
        Ok(())
    }
}
