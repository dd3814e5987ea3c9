//! JSON messages exchanged between the session service and its clients.
//!
//! Every message is a JSON object with a `"type"` tag.
//!
//! Server to client: `snapshot`, `text_emitted`, `speech_request`, `error`.
//! Client to server: `sim_blink`, `set_threshold`, `set_dwell`, `get_snapshot`.

use serde::{Deserialize, Serialize};

use crate::protocol::EegBands;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    SimBlink,
    SetThreshold { value: i64 },
    SetDwell { ms: i64 },
    GetSnapshot,
}

impl ClientMessage {
    /// Parses a client frame. The error converts into an `error` message
    /// ready to send back.
    pub fn parse(text: &str) -> Result<Self, BadCommand> {
        serde_json::from_str(text).map_err(|e| {
            let kind = serde_json::from_str::<serde_json::Value>(text)
                .ok()
                .and_then(|v| v.get("type").and_then(|t| t.as_str()).map(str::to_string));
            let message = match kind {
                Some(t) if !Self::KNOWN.contains(&t.as_str()) => format!("unknown command {t:?}"),
                _ => format!("malformed command: {e}"),
            };
            BadCommand(message)
        })
    }

    pub const KNOWN: [&'static str; 4] =
        ["sim_blink", "set_threshold", "set_dwell", "get_snapshot"];
}

/// A client frame that is not a JSON object with a known `type`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct BadCommand(pub String);

impl From<BadCommand> for ServerMessage {
    fn from(e: BadCommand) -> Self {
        ServerMessage::Error { message: e.0 }
    }
}

// Snapshots are nearly all of the traffic, so boxing them saves nothing.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot(Snapshot),
    TextEmitted { text: String },
    SpeechRequest { text: String },
    Error { message: String },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceStatus {
    Connected,
    Disconnected,
    Ended,
}

/// Everything a client needs to draw the session, copied out of the loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    /// Increases by one per published snapshot.
    pub seq: u64,
    /// Session clock in milliseconds (replay time in replay mode).
    pub t_ms: u64,
    pub panel: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub controls: Vec<String>,
    pub focus: usize,
    pub composed_code: String,
    pub composed_text: String,
    pub suggestions: Vec<String>,
    pub telemetry: TelemetryView,
    pub stats: SessionStats,
    pub settings: SettingsView,
    pub source: SourceStatus,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelemetryView {
    pub blink_strength: u8,
    pub poor_signal: u8,
    pub bands: EegBands,
    pub updated_at_ms: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionStats {
    pub packets: u64,
    pub checksum_failures: u64,
    pub desync_events: u64,
    pub truncated_rows: u64,
    pub blinks: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettingsView {
    pub blink_threshold: u8,
    pub dwell_ms: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_frames_match_schema() {
        let cases = [
            (ClientMessage::SimBlink, r#"{"type":"sim_blink"}"#),
            (
                ClientMessage::SetThreshold { value: 80 },
                r#"{"type":"set_threshold","value":80}"#,
            ),
            (
                ClientMessage::SetDwell { ms: 800 },
                r#"{"type":"set_dwell","ms":800}"#,
            ),
            (ClientMessage::GetSnapshot, r#"{"type":"get_snapshot"}"#),
        ];
        for (msg, json) in cases {
            assert_eq!(serde_json::to_string(&msg).unwrap(), json);
            assert_eq!(ClientMessage::parse(json).unwrap(), msg);
        }
    }

    #[test]
    fn unknown_and_malformed_commands() {
        let Err(BadCommand(message)) = ClientMessage::parse(r#"{"type":"reboot"}"#) else {
            panic!("expected error");
        };
        assert!(message.contains("unknown command"), "{message}");
        let Err(BadCommand(message)) = ClientMessage::parse(r#"{"type":"set_dwell"}"#) else {
            panic!("expected error");
        };
        assert!(message.starts_with("malformed"), "{message}");
        assert!(ClientMessage::parse("not json").is_err());
    }

    #[test]
    fn event_frames() {
        assert_eq!(
            ServerMessage::TextEmitted { text: "hi".into() }.to_json(),
            r#"{"type":"text_emitted","text":"hi"}"#
        );
        assert_eq!(
            ServerMessage::SpeechRequest { text: "hi".into() }.to_json(),
            r#"{"type":"speech_request","text":"hi"}"#
        );
    }

    #[test]
    fn snapshot_is_flat_and_tagged() {
        let snap = Snapshot {
            seq: 0,
            t_ms: 0,
            panel: "ModeScan".into(),
            category: None,
            controls: vec!["Customized Message".into(), "Compose Text".into()],
            focus: 0,
            composed_code: String::new(),
            composed_text: String::new(),
            suggestions: vec![],
            telemetry: TelemetryView::default(),
            stats: SessionStats::default(),
            settings: SettingsView {
                blink_threshold: 80,
                dwell_ms: 1000,
            },
            source: SourceStatus::Connected,
        };
        let v: serde_json::Value =
            serde_json::from_str(&ServerMessage::Snapshot(snap.clone()).to_json()).unwrap();
        assert_eq!(v["type"], "snapshot");
        assert_eq!(v["panel"], "ModeScan");
        assert_eq!(v["focus"], 0);
        assert_eq!(v["telemetry"]["bands"]["low_alpha"], 0);
        assert_eq!(v["stats"]["blinks"], 0);
        assert_eq!(v["source"], "connected");
        let back: ServerMessage = serde_json::from_value(v).unwrap();
        assert_eq!(back, ServerMessage::Snapshot(snap));
    }
}
