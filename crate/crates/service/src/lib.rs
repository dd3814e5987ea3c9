//! Session service: runs the blink pipeline against a serial port or a
//! replay capture and serves snapshots and commands over HTTP/WebSocket.

pub mod config;
pub mod engine;
pub mod replay;
mod server;
pub mod session;

pub use config::{SessionConfig, SourceConfig};
pub use server::SuggestResponse;
pub use session::{run, start, Resources, SessionError, SessionHandle, SessionSummary};
