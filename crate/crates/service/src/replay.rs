//! Capture files and command scripts.
//!
//! A capture is JSON lines of `{"t_ms": <ms since start>, "data": "<hex>"}`.
//! A command script is JSON lines of `{"t_ms": <ms>, "cmd": <client message>}`.
//! Both must be in non-decreasing `t_ms` order. Blank lines are ignored.

use std::io::{BufRead, Write};
use std::path::Path;

use blinkscribe_core::protocol::{DataRow, StreamPacket};
use blinkscribe_core::wire::ClientMessage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub t_ms: u64,
    #[serde(with = "hex_bytes")]
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedCommand {
    pub t_ms: u64,
    pub cmd: ClientMessage,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: t_ms {t_ms} is earlier than the previous record ({prev_ms})")]
    OutOfOrder {
        line: usize,
        t_ms: u64,
        prev_ms: u64,
    },
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode_upper(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        hex::decode(compact).map_err(serde::de::Error::custom)
    }
}

/// Line-by-line reader that enforces timestamp order.
pub struct JsonLines<R, T> {
    lines: std::io::Lines<R>,
    line: usize,
    prev_ms: Option<u64>,
    _item: std::marker::PhantomData<T>,
}

pub trait Timed {
    fn t_ms(&self) -> u64;
}

impl Timed for ReplayRecord {
    fn t_ms(&self) -> u64 {
        self.t_ms
    }
}

impl Timed for ScriptedCommand {
    fn t_ms(&self) -> u64 {
        self.t_ms
    }
}

impl<R: BufRead, T: Timed + for<'de> Deserialize<'de>> JsonLines<R, T> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line: 0,
            prev_ms: None,
            _item: std::marker::PhantomData,
        }
    }
}

impl<R: BufRead, T: Timed + for<'de> Deserialize<'de>> Iterator for JsonLines<R, T> {
    type Item = Result<T, ReplayError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(e) => {
                    return Some(Err(ReplayError::Malformed {
                        line: self.line + 1,
                        reason: e.to_string(),
                    }))
                }
            };
            self.line += 1;
            if text.trim().is_empty() {
                continue;
            }
            let item: T = match serde_json::from_str(&text) {
                Ok(r) => r,
                Err(e) => {
                    return Some(Err(ReplayError::Malformed {
                        line: self.line,
                        reason: e.to_string(),
                    }))
                }
            };
            if let Some(prev_ms) = self.prev_ms.filter(|p| item.t_ms() < *p) {
                return Some(Err(ReplayError::OutOfOrder {
                    line: self.line,
                    t_ms: item.t_ms(),
                    prev_ms,
                }));
            }
            self.prev_ms = Some(item.t_ms());
            return Some(Ok(item));
        }
    }
}

pub fn open_capture(
    path: &Path,
) -> Result<JsonLines<std::io::BufReader<std::fs::File>, ReplayRecord>, ReplayError> {
    let file = std::fs::File::open(path).map_err(|source| ReplayError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(JsonLines::new(std::io::BufReader::new(file)))
}

pub fn load_script(path: &Path) -> Result<Vec<ScriptedCommand>, ReplayError> {
    let file = std::fs::File::open(path).map_err(|source| ReplayError::Io {
        path: path.display().to_string(),
        source,
    })?;
    JsonLines::new(std::io::BufReader::new(file)).collect()
}

pub fn write_capture<W: Write>(mut out: W, records: &[ReplayRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Assembles synthetic captures, one record per call.
#[derive(Debug, Clone, Default)]
pub struct CaptureBuilder {
    records: Vec<ReplayRecord>,
}

impl CaptureBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// One framed packet holding `rows`.
    pub fn rows(&mut self, t_ms: u64, rows: &[DataRow]) -> &mut Self {
        let mut payload = Vec::new();
        for r in rows {
            r.encode_into(&mut payload);
        }
        let packet = StreamPacket::new(payload).expect("rows fit in one packet");
        self.bytes(t_ms, packet.to_bytes())
    }

    pub fn blink(&mut self, t_ms: u64, strength: u8) -> &mut Self {
        self.rows(t_ms, &[DataRow::BlinkStrength(strength)])
    }

    /// Raw bytes, framed or not.
    pub fn bytes(&mut self, t_ms: u64, data: Vec<u8>) -> &mut Self {
        self.records.push(ReplayRecord { t_ms, data });
        self
    }

    pub fn records(&self) -> &[ReplayRecord] {
        &self.records
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        write_capture(&mut out, &self.records)?;
        out.flush()
    }
}

/// Blink times that select a control after `ticks[i]` focus steps, for
/// each step in turn. Every blink restarts the dwell timer, so blink `i`
/// lands half a dwell after the `ticks[i]`-th tick following blink `i - 1`.
pub fn blink_schedule(ticks: &[usize], dwell_ms: u64) -> Vec<u64> {
    let mut last = 0;
    ticks
        .iter()
        .map(|&k| {
            last += k as u64 * dwell_ms + dwell_ms / 2;
            last
        })
        .collect()
}
