//! Voluntary-blink detection and live telemetry.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{DataRow, EegBands};

pub const DEFAULT_REFRACTORY_MS: u64 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlinkEvent {
    pub t_ms: u64,
    pub strength: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectorConfig {
    /// A blink fires only when its strength is strictly above this.
    pub threshold: u8,
    pub refractory_ms: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold: 80,
            refractory_ms: DEFAULT_REFRACTORY_MS,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Telemetry {
    pub last_blink_strength: u8,
    pub poor_signal: u8,
    pub bands: EegBands,
    pub updated_at_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SignalError {
    #[error("timestamp went backwards: {t_ms} ms after {last_ms} ms")]
    OutOfOrderTimestamp { last_ms: u64, t_ms: u64 },
}

#[derive(Debug, Clone, Default)]
pub struct BlinkDetector {
    config: DetectorConfig,
    last_t_ms: Option<u64>,
    last_event_ms: Option<u64>,
    telemetry: Telemetry,
}

impl BlinkDetector {
    pub fn new(config: DetectorConfig) -> Self {
        Self {
            config,
            ..Default::default()
        }
    }

    pub fn config(&self) -> DetectorConfig {
        self.config
    }

    pub fn set_threshold(&mut self, threshold: u8) {
        self.config.threshold = threshold;
    }

    pub fn telemetry(&self) -> Telemetry {
        self.telemetry
    }

    /// Feeds one row observed at `t_ms`. Telemetry is updated for every row
    /// that carries a telemetry field, whether or not a blink fires.
    pub fn observe(&mut self, row: &DataRow, t_ms: u64) -> Result<Option<BlinkEvent>, SignalError> {
        if let Some(last_ms) = self.last_t_ms {
            if t_ms < last_ms {
                return Err(SignalError::OutOfOrderTimestamp { last_ms, t_ms });
            }
        }
        self.last_t_ms = Some(t_ms);

        match *row {
            DataRow::BlinkStrength(strength) => {
                self.touch(t_ms).last_blink_strength = strength;
                if strength <= self.config.threshold {
                    return Ok(None);
                }
                let rested = self
                    .last_event_ms
                    .is_none_or(|prev| t_ms - prev >= self.config.refractory_ms);
                if !rested {
                    return Ok(None);
                }
                self.last_event_ms = Some(t_ms);
                Ok(Some(BlinkEvent { t_ms, strength }))
            }
            DataRow::PoorSignal(v) => {
                self.touch(t_ms).poor_signal = v;
                Ok(None)
            }
            DataRow::EegPower(bands) => {
                self.touch(t_ms).bands = bands;
                Ok(None)
            }
            DataRow::RawSample(_) | DataRow::Unknown { .. } => Ok(None),
        }
    }

    fn touch(&mut self, t_ms: u64) -> &mut Telemetry {
        self.telemetry.updated_at_ms = t_ms;
        &mut self.telemetry
    }
}
