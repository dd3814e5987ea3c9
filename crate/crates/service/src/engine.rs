//! The single-owner session state.
//!
//! `Engine` knows nothing about sockets, files or wall clocks. Callers hand
//! it timestamped inputs and it returns the messages to publish. Focus ticks
//! are generated internally from the timestamps it is given, so a replay
//! driven by capture timestamps is fully reproducible.

use std::sync::Arc;

use blinkscribe_core::predict::Predictor;
use blinkscribe_core::protocol::StreamParser;
use blinkscribe_core::selector::{Panel, PanelCatalog, ScanState, SelectorOutput};
use blinkscribe_core::signal::{BlinkDetector, DetectorConfig};
use blinkscribe_core::wire::{
    ClientMessage, ServerMessage, SessionStats, SettingsView, Snapshot, SourceStatus, TelemetryView,
};
use thiserror::Error;

use crate::config::check_dwell;

pub type SharedPredictor = Arc<dyn Predictor + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineSettings {
    pub blink_threshold: u8,
    pub refractory_ms: u64,
    pub dwell_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommandError {
    #[error("{0}")]
    Rejected(String),
}

impl From<CommandError> for ServerMessage {
    fn from(e: CommandError) -> Self {
        ServerMessage::Error {
            message: e.to_string(),
        }
    }
}

pub struct Engine {
    parser: StreamParser,
    detector: BlinkDetector,
    catalog: Arc<PanelCatalog>,
    predictor: SharedPredictor,
    scan: ScanState,
    dwell_ms: u64,
    now_ms: u64,
    next_tick_ms: u64,
    blinks: u64,
    truncated_rows: u64,
    source: SourceStatus,
    seq: u64,
}

impl Engine {
    pub fn new(
        settings: EngineSettings,
        catalog: Arc<PanelCatalog>,
        predictor: SharedPredictor,
        start_ms: u64,
    ) -> Self {
        Self {
            parser: StreamParser::new(),
            detector: BlinkDetector::new(DetectorConfig {
                threshold: settings.blink_threshold,
                refractory_ms: settings.refractory_ms,
            }),
            catalog,
            predictor,
            scan: ScanState::initial(),
            dwell_ms: settings.dwell_ms,
            now_ms: start_ms,
            next_tick_ms: start_ms + settings.dwell_ms,
            blinks: 0,
            truncated_rows: 0,
            source: SourceStatus::Connected,
            seq: 0,
        }
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn next_tick_ms(&self) -> u64 {
        self.next_tick_ms
    }

    pub fn scan(&self) -> &ScanState {
        &self.scan
    }

    pub fn stats(&self) -> SessionStats {
        let p = self.parser.stats();
        SessionStats {
            packets: p.packets,
            checksum_failures: p.checksum_failures,
            desync_events: p.desync_events,
            truncated_rows: self.truncated_rows,
            blinks: self.blinks,
        }
    }

    /// Current state without consuming a sequence number.
    pub fn snapshot(&self) -> Snapshot {
        let category = match self.scan.panel() {
            Panel::MessageScan { category, .. } => {
                self.catalog.category(category).map(|(n, _)| n.to_string())
            }
            _ => None,
        };
        let t = self.detector.telemetry();
        Snapshot {
            seq: self.seq,
            t_ms: self.now_ms,
            panel: self.scan.panel().name().to_string(),
            category,
            controls: self.scan.controls(&self.catalog),
            focus: self.scan.focus(),
            composed_code: self.scan.composed_code().to_string(),
            composed_text: self.scan.composed_text().to_string(),
            suggestions: self
                .scan
                .suggestions()
                .iter()
                .map(|s| s.word.clone())
                .collect(),
            telemetry: TelemetryView {
                blink_strength: t.last_blink_strength,
                poor_signal: t.poor_signal,
                bands: t.bands,
                updated_at_ms: t.updated_at_ms,
            },
            stats: self.stats(),
            settings: SettingsView {
                blink_threshold: self.detector.config().threshold,
                dwell_ms: self.dwell_ms,
            },
            source: self.source,
        }
    }

    fn publish(&mut self, out: &mut Vec<ServerMessage>) {
        self.seq += 1;
        out.push(ServerMessage::Snapshot(self.snapshot()));
    }

    /// Moves the clock forward to `t_ms`, firing every focus tick that falls
    /// due on the way. Earlier timestamps are ignored.
    pub fn advance_to(&mut self, t_ms: u64, out: &mut Vec<ServerMessage>) {
        while self.next_tick_ms <= t_ms {
            self.now_ms = self.next_tick_ms;
            self.next_tick_ms += self.dwell_ms;
            let next = self.scan.tick(&self.catalog);
            if next != self.scan {
                self.scan = next;
                self.publish(out);
            }
        }
        self.now_ms = self.now_ms.max(t_ms);
    }

    /// Bytes read from the source at `t_ms`.
    pub fn feed(&mut self, t_ms: u64, bytes: &[u8], out: &mut Vec<ServerMessage>) {
        self.advance_to(t_ms, out);
        let t_ms = self.now_ms;
        let mut shown = self.detector.telemetry();
        let mut packets = Vec::new();
        self.parser.feed_with(bytes, |p| packets.push(p));
        for packet in packets {
            let rows = packet.rows();
            if rows.error.is_some() {
                self.truncated_rows += 1;
            }
            for row in &rows.rows {
                // clock is clamped above, so the detector never sees time go backwards
                if let Ok(Some(_)) = self.detector.observe(row, t_ms) {
                    self.blinks += 1;
                    self.apply_blink(out);
                    shown = self.detector.telemetry();
                }
            }
        }
        if self.detector.telemetry() != shown {
            self.publish(out);
        }
    }

    /// A blink from any origin: the detector or a simulated press.
    fn apply_blink(&mut self, out: &mut Vec<ServerMessage>) {
        let (next, outputs) = self.scan.on_blink(&self.catalog, self.predictor.as_ref());
        // scanning restarts a full dwell after every selection
        self.next_tick_ms = self.now_ms + self.dwell_ms;
        self.scan = next;
        for o in outputs {
            match o {
                SelectorOutput::TextEmitted(text) => out.push(ServerMessage::TextEmitted { text }),
                SelectorOutput::SpeechRequested(text) => {
                    out.push(ServerMessage::SpeechRequest { text })
                }
                SelectorOutput::StateChanged => {}
            }
        }
        // the blink counter changed even when the selector did not
        self.publish(out);
    }

    /// Applies a client command at `t_ms`. `get_snapshot` answers with the
    /// current snapshot; the others publish their effect through `out`.
    pub fn command(
        &mut self,
        t_ms: u64,
        cmd: &ClientMessage,
        out: &mut Vec<ServerMessage>,
    ) -> Result<Option<Snapshot>, CommandError> {
        self.advance_to(t_ms, out);
        match *cmd {
            ClientMessage::SimBlink => {
                self.blinks += 1;
                self.apply_blink(out);
                Ok(None)
            }
            ClientMessage::SetThreshold { value } => {
                let v = u8::try_from(value).map_err(|_| {
                    CommandError::Rejected(format!("threshold {value} outside 0..=255"))
                })?;
                self.detector.set_threshold(v);
                self.publish(out);
                Ok(None)
            }
            ClientMessage::SetDwell { ms } => {
                let ms = u64::try_from(ms)
                    .ok()
                    .filter(|ms| check_dwell(*ms).is_ok())
                    .ok_or_else(|| {
                        CommandError::Rejected(format!("dwell {ms} ms below the 100 ms minimum"))
                    })?;
                self.dwell_ms = ms;
                self.next_tick_ms = self.now_ms + ms;
                self.publish(out);
                Ok(None)
            }
            ClientMessage::GetSnapshot => Ok(Some(self.snapshot())),
        }
    }

    pub fn set_source_status(&mut self, status: SourceStatus, out: &mut Vec<ServerMessage>) {
        if self.source != status {
            self.source = status;
            self.publish(out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use blinkscribe_core::predict::{Dictionary, T6Predictor, T6Trie};
    use blinkscribe_core::protocol::StreamPacket;

    fn engine() -> Engine {
        let dict = Dictionary::from_words(["there", "their", "answer", "any", "bye"]).unwrap();
        let predictor = T6Predictor::new(T6Trie::build(&dict).unwrap(), 5);
        Engine::new(
            EngineSettings {
                blink_threshold: 80,
                refractory_ms: 500,
                dwell_ms: 1000,
            },
            Arc::new(PanelCatalog::default()),
            Arc::new(predictor),
            0,
        )
    }

    fn snapshots(out: &[ServerMessage]) -> Vec<&Snapshot> {
        out.iter()
            .filter_map(|m| match m {
                ServerMessage::Snapshot(s) => Some(s),
                _ => None,
            })
            .collect()
    }

    fn blink_frame(strength: u8) -> Vec<u8> {
        StreamPacket::new(vec![0x16, strength]).unwrap().to_bytes()
    }

    #[test]
    fn initial_snapshot() {
        let s = engine().snapshot();
        assert_eq!(
            (s.panel.as_str(), s.focus, s.composed_text.as_str()),
            ("ModeScan", 0, "")
        );
        assert_eq!(s.controls, ["Customized Message", "Compose Text"]);
        assert_eq!(s.source, SourceStatus::Connected);
    }

    #[test]
    fn ticks_follow_the_given_clock() {
        let mut e = engine();
        let mut out = Vec::new();
        e.advance_to(999, &mut out);
        assert!(out.is_empty());
        e.advance_to(3000, &mut out);
        let focus: Vec<usize> = snapshots(&out).iter().map(|s| s.focus).collect();
        assert_eq!(focus, [1, 0, 1]);
        assert_eq!(snapshots(&out)[2].t_ms, 3000);
    }

    #[test]
    fn detected_blink_moves_to_categories() {
        let mut e = engine();
        let mut out = Vec::new();
        e.feed(10, &blink_frame(90), &mut out);
        let snaps = snapshots(&out);
        assert_eq!(snaps.last().unwrap().panel, "CategoryScan");
        assert_eq!(snaps.last().unwrap().stats.blinks, 1);
        assert_eq!(snaps.last().unwrap().stats.packets, 1);
        // the dwell timer restarts at the selection
        assert_eq!(e.next_tick_ms(), 1010);
    }

    #[test]
    fn weak_blink_only_updates_telemetry() {
        let mut e = engine();
        let mut out = Vec::new();
        e.feed(10, &blink_frame(80), &mut out);
        let snaps = snapshots(&out);
        assert_eq!(snaps.len(), 1);
        assert_eq!(snaps[0].panel, "ModeScan");
        assert_eq!(snaps[0].telemetry.blink_strength, 80);
        // raw samples change nothing visible
        out.clear();
        let raw = StreamPacket::new(vec![0x80, 2, 0, 1]).unwrap().to_bytes();
        e.feed(11, &raw, &mut out);
        assert!(out.is_empty());
    }

    #[test]
    fn sim_blink_equals_real_blink() {
        let mut a = engine();
        let mut b = engine();
        let mut out = Vec::new();
        a.command(10, &ClientMessage::SimBlink, &mut out).unwrap();
        b.feed(10, &blink_frame(200), &mut out);
        assert_eq!(a.scan(), b.scan());
        assert_eq!(a.snapshot().panel, "CategoryScan");
    }

    #[test]
    fn set_dwell_floor() {
        let mut e = engine();
        let mut out = Vec::new();
        let err = e
            .command(0, &ClientMessage::SetDwell { ms: 50 }, &mut out)
            .unwrap_err();
        assert!(matches!(err, CommandError::Rejected(_)));
        assert_eq!(e.snapshot().settings.dwell_ms, 1000);
        assert!(e
            .command(0, &ClientMessage::SetDwell { ms: -5 }, &mut out)
            .is_err());
        e.command(0, &ClientMessage::SetDwell { ms: 250 }, &mut out)
            .unwrap();
        assert_eq!(e.snapshot().settings.dwell_ms, 250);
        assert_eq!(e.next_tick_ms(), 250);
    }

    #[test]
    fn set_threshold_live() {
        let mut e = engine();
        let mut out = Vec::new();
        e.command(0, &ClientMessage::SetThreshold { value: 95 }, &mut out)
            .unwrap();
        e.feed(1, &blink_frame(90), &mut out);
        assert_eq!(e.snapshot().panel, "ModeScan");
        assert!(e
            .command(0, &ClientMessage::SetThreshold { value: 256 }, &mut out)
            .is_err());
        assert_eq!(e.snapshot().settings.blink_threshold, 95);
    }

    #[test]
    fn get_snapshot_does_not_publish() {
        let mut e = engine();
        let mut out = Vec::new();
        let snap = e
            .command(0, &ClientMessage::GetSnapshot, &mut out)
            .unwrap()
            .unwrap();
        assert!(out.is_empty());
        assert_eq!(snap.panel, "ModeScan");
    }

    #[test]
    fn source_status_changes_publish() {
        let mut e = engine();
        let mut out = Vec::new();
        e.set_source_status(SourceStatus::Disconnected, &mut out);
        e.set_source_status(SourceStatus::Disconnected, &mut out);
        assert_eq!(snapshots(&out).len(), 1);
        assert_eq!(snapshots(&out)[0].source, SourceStatus::Disconnected);
    }

    #[test]
    fn seq_increases_per_publish() {
        let mut e = engine();
        let mut out = Vec::new();
        e.advance_to(5000, &mut out);
        let seqs: Vec<u64> = snapshots(&out).iter().map(|s| s.seq).collect();
        assert_eq!(seqs, (1..=5).collect::<Vec<_>>());
    }
}
