//! Framing and row decoding for the headset byte stream.
//!
//! A frame on the wire is:
//!
//! ```text
//! 0xAA 0xAA | length (1..=169) | payload[length] | checksum
//! ```
//!
//! where `checksum = !(sum of payload bytes) & 0xFF`. The payload is a
//! sequence of rows. Codes below `0x80` carry exactly one value byte; codes
//! `0x80` and above carry a one-byte value length followed by that many bytes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SYNC: u8 = 0xAA;
pub const MAX_PAYLOAD_LEN: usize = 169;

pub const CODE_POOR_SIGNAL: u8 = 0x02;
pub const CODE_BLINK_STRENGTH: u8 = 0x16;
pub const CODE_RAW_SAMPLE: u8 = 0x80;
pub const CODE_EEG_POWER: u8 = 0x83;

const EEG_POWER_LEN: usize = 24;
const POOR_SIGNAL_MAX: u8 = 200;

/// Inverted 8-bit sum of the payload bytes.
pub fn checksum(payload: &[u8]) -> u8 {
    !payload.iter().fold(0u8, |acc, b| acc.wrapping_add(*b))
}

/// One checksum-valid frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StreamPacket {
    payload: Vec<u8>,
    checksum: u8,
}

impl StreamPacket {
    /// Builds a packet around `payload`, computing its checksum.
    pub fn new(payload: Vec<u8>) -> Result<Self, ProtocolError> {
        if payload.is_empty() || payload.len() > MAX_PAYLOAD_LEN {
            return Err(ProtocolError::PayloadLength(payload.len()));
        }
        let checksum = checksum(&payload);
        Ok(Self { payload, checksum })
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn checksum(&self) -> u8 {
        self.checksum
    }

    pub fn into_payload(self) -> Vec<u8> {
        self.payload
    }

    /// Wire encoding: sync, sync, length, payload, checksum.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.payload.len() + 4);
        out.extend_from_slice(&[SYNC, SYNC, self.payload.len() as u8]);
        out.extend_from_slice(&self.payload);
        out.push(self.checksum);
        out
    }

    pub fn rows(&self) -> PayloadRows {
        parse_payload(&self.payload)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("payload length {0} outside 1..={MAX_PAYLOAD_LEN}")]
    PayloadLength(usize),
    #[error("payload ends mid-row at offset {offset} (code 0x{code:02X})")]
    TruncatedRow { offset: usize, code: u8 },
}

/// Relative power of the eight frequency bands, each a 24-bit value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EegBands {
    pub delta: u32,
    pub theta: u32,
    pub low_alpha: u32,
    pub high_alpha: u32,
    pub low_beta: u32,
    pub high_beta: u32,
    pub low_gamma: u32,
    pub mid_gamma: u32,
}

impl EegBands {
    pub const MAX_VALUE: u32 = 0x00FF_FFFF;

    fn from_be_bytes(bytes: &[u8; EEG_POWER_LEN]) -> Self {
        let band = |i: usize| {
            let b = &bytes[i * 3..i * 3 + 3];
            u32::from_be_bytes([0, b[0], b[1], b[2]])
        };
        Self {
            delta: band(0),
            theta: band(1),
            low_alpha: band(2),
            high_alpha: band(3),
            low_beta: band(4),
            high_beta: band(5),
            low_gamma: band(6),
            mid_gamma: band(7),
        }
    }

    pub fn values(&self) -> [u32; 8] {
        [
            self.delta,
            self.theta,
            self.low_alpha,
            self.high_alpha,
            self.low_beta,
            self.high_beta,
            self.low_gamma,
            self.mid_gamma,
        ]
    }

    /// Big-endian 24-byte encoding; values are masked to 24 bits.
    pub fn to_be_bytes(&self) -> [u8; EEG_POWER_LEN] {
        let mut out = [0u8; EEG_POWER_LEN];
        for (i, v) in self.values().iter().enumerate() {
            let b = (v & Self::MAX_VALUE).to_be_bytes();
            out[i * 3..i * 3 + 3].copy_from_slice(&b[1..]);
        }
        out
    }
}

/// A decoded payload row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataRow {
    /// Electrode contact quality, 0 (best) to 200.
    PoorSignal(u8),
    BlinkStrength(u8),
    RawSample(i16),
    EegPower(EegBands),
    /// Any row this decoder does not interpret, kept byte for byte.
    Unknown {
        code: u8,
        value: Vec<u8>,
    },
}

impl DataRow {
    pub fn code(&self) -> u8 {
        match self {
            DataRow::PoorSignal(_) => CODE_POOR_SIGNAL,
            DataRow::BlinkStrength(_) => CODE_BLINK_STRENGTH,
            DataRow::RawSample(_) => CODE_RAW_SAMPLE,
            DataRow::EegPower(_) => CODE_EEG_POWER,
            DataRow::Unknown { code, .. } => *code,
        }
    }

    /// Appends the row's wire encoding to `out`.
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            DataRow::PoorSignal(v) => out.extend_from_slice(&[CODE_POOR_SIGNAL, *v]),
            DataRow::BlinkStrength(v) => out.extend_from_slice(&[CODE_BLINK_STRENGTH, *v]),
            DataRow::RawSample(v) => {
                out.extend_from_slice(&[CODE_RAW_SAMPLE, 2]);
                out.extend_from_slice(&v.to_be_bytes());
            }
            DataRow::EegPower(bands) => {
                out.extend_from_slice(&[CODE_EEG_POWER, EEG_POWER_LEN as u8]);
                out.extend_from_slice(&bands.to_be_bytes());
            }
            DataRow::Unknown { code, value } => {
                out.push(*code);
                if *code >= 0x80 {
                    out.push(value.len() as u8);
                }
                out.extend_from_slice(value);
            }
        }
    }
}

/// Rows decoded from one payload, plus the truncation error if the payload
/// ended mid-row. Rows before the truncation point are kept.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PayloadRows {
    pub rows: Vec<DataRow>,
    pub error: Option<ProtocolError>,
}

pub fn parse_payload(payload: &[u8]) -> PayloadRows {
    let mut rows = Vec::new();
    let mut pos = 0;
    while pos < payload.len() {
        let code = payload[pos];
        let (value, next) = if code < 0x80 {
            match payload.get(pos + 1) {
                Some(_) => (&payload[pos + 1..pos + 2], pos + 2),
                None => return truncated(rows, pos, code),
            }
        } else {
            let Some(&len) = payload.get(pos + 1) else {
                return truncated(rows, pos, code);
            };
            let start = pos + 2;
            let end = start + len as usize;
            if end > payload.len() {
                return truncated(rows, pos, code);
            }
            (&payload[start..end], end)
        };
        rows.push(decode_row(code, value));
        pos = next;
    }
    PayloadRows { rows, error: None }
}

fn truncated(rows: Vec<DataRow>, offset: usize, code: u8) -> PayloadRows {
    PayloadRows {
        rows,
        error: Some(ProtocolError::TruncatedRow { offset, code }),
    }
}

fn decode_row(code: u8, value: &[u8]) -> DataRow {
    match (code, value) {
        (CODE_POOR_SIGNAL, [v]) if *v <= POOR_SIGNAL_MAX => DataRow::PoorSignal(*v),
        (CODE_BLINK_STRENGTH, [v]) => DataRow::BlinkStrength(*v),
        (CODE_RAW_SAMPLE, [hi, lo]) => DataRow::RawSample(i16::from_be_bytes([*hi, *lo])),
        (CODE_EEG_POWER, v) if v.len() == EEG_POWER_LEN => DataRow::EegPower(
            EegBands::from_be_bytes(v.try_into().expect("length checked")),
        ),
        _ => DataRow::Unknown {
            code,
            value: value.to_vec(),
        },
    }
}

/// Counters kept by [`StreamParser`]. All of them depend only on the byte
/// stream, never on how it was split into chunks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParserStats {
    pub packets: u64,
    pub checksum_failures: u64,
    /// Sync pairs followed by an unusable length byte.
    pub desync_events: u64,
    /// Bytes thrown away while hunting for a sync pair.
    pub discarded_bytes: u64,
}

/// Incremental frame extractor.
///
/// Bytes that cannot start a frame are discarded. A frame with a bad length
/// or checksum is abandoned one byte past its first sync byte, so a real
/// frame hidden inside a corrupt one is still found.
#[derive(Debug, Default, Clone)]
pub struct StreamParser {
    buf: Vec<u8>,
    stats: ParserStats,
}

impl StreamParser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> ParserStats {
        self.stats
    }

    /// Bytes held back waiting for the rest of a frame.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }

    pub fn feed_bytes(&mut self, chunk: &[u8]) -> Vec<StreamPacket> {
        let mut out = Vec::new();
        self.feed_with(chunk, |p| out.push(p));
        out
    }

    /// Like [`feed_bytes`](Self::feed_bytes) but hands packets to a callback
    /// instead of collecting them.
    pub fn feed_with(&mut self, chunk: &[u8], mut emit: impl FnMut(StreamPacket)) {
        if chunk.is_empty() {
            return;
        }
        self.buf.extend_from_slice(chunk);
        let consumed = self.drain_frames(&mut emit);
        self.buf.drain(..consumed);
    }

    /// Scans `self.buf` and returns how many leading bytes are fully decided.
    fn drain_frames(&mut self, emit: &mut impl FnMut(StreamPacket)) -> usize {
        let buf = &self.buf;
        let mut pos = 0;
        loop {
            // hunt for a sync pair
            let Some(rel) = buf[pos..].iter().position(|&b| b == SYNC) else {
                self.stats.discarded_bytes += (buf.len() - pos) as u64;
                return buf.len();
            };
            self.stats.discarded_bytes += rel as u64;
            pos += rel;
            let Some(&second) = buf.get(pos + 1) else {
                return pos;
            };
            if second != SYNC {
                self.stats.discarded_bytes += 1;
                pos += 1;
                continue;
            }
            let Some(&len_byte) = buf.get(pos + 2) else {
                return pos;
            };
            if len_byte == SYNC {
                // AA AA AA: the frame may start one byte later
                self.stats.discarded_bytes += 1;
                pos += 1;
                continue;
            }
            let len = len_byte as usize;
            if len == 0 || len > MAX_PAYLOAD_LEN {
                self.stats.desync_events += 1;
                self.stats.discarded_bytes += 1;
                pos += 1;
                continue;
            }
            let end = pos + 3 + len + 1;
            if end > buf.len() {
                return pos;
            }
            let payload = &buf[pos + 3..pos + 3 + len];
            let sum = buf[end - 1];
            if checksum(payload) != sum {
                self.stats.checksum_failures += 1;
                self.stats.discarded_bytes += 1;
                pos += 1;
                continue;
            }
            self.stats.packets += 1;
            emit(StreamPacket {
                payload: payload.to_vec(),
                checksum: sum,
            });
            pos = end;
        }
    }
}
