use std::net::SocketAddr;
use std::path::PathBuf;

use thiserror::Error;

pub const SUPPORTED_BAUD_RATES: [u32; 3] = [9600, 57600, 115200];
pub const MIN_DWELL_MS: u64 = 100;
pub const DEFAULT_DWELL_MS: u64 = 1000;
pub const DEFAULT_THRESHOLD: u8 = 80;
pub const DEFAULT_LISTEN: &str = "127.0.0.1:7878";

#[derive(Debug, Clone, PartialEq)]
pub enum SourceConfig {
    Serial {
        port: String,
        baud: u32,
    },
    /// `speed` scales replay time; `0.0` replays as fast as possible.
    Replay {
        path: PathBuf,
        speed: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub source: SourceConfig,
    pub blink_threshold: u8,
    pub refractory_ms: u64,
    pub dwell_ms: u64,
    pub dictionary_path: PathBuf,
    /// Precompiled suggestion table; the trie is searched directly without it.
    pub index_path: Option<PathBuf>,
    /// Stored messages; the built-in set is used without it.
    pub catalog_path: Option<PathBuf>,
    pub num_words: usize,
    pub listen: SocketAddr,
    /// Timed commands applied on the replay clock.
    pub command_script: Option<PathBuf>,
    /// Every outgoing message is appended here as one JSON line.
    pub snapshot_log: Option<PathBuf>,
    /// Keep serving on the wall clock after a replay ends.
    pub stay_after_replay: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("dwell time {0} ms is below the {MIN_DWELL_MS} ms minimum")]
    DwellTooShort(u64),
    #[error("unsupported baud rate {0} (expected one of 9600, 57600, 115200)")]
    BaudRate(u32),
    #[error("replay speed must be a finite number >= 0, got {0}")]
    ReplaySpeed(String),
    #[error("suggestion count must be at least 1")]
    NumWords,
    #[error("{0}")]
    Invalid(String),
}

impl SessionConfig {
    /// Replay configuration with defaults for everything else.
    pub fn replay(path: impl Into<PathBuf>, dictionary_path: impl Into<PathBuf>) -> Self {
        Self {
            source: SourceConfig::Replay {
                path: path.into(),
                speed: 0.0,
            },
            blink_threshold: DEFAULT_THRESHOLD,
            refractory_ms: blinkscribe_core::signal::DEFAULT_REFRACTORY_MS,
            dwell_ms: DEFAULT_DWELL_MS,
            dictionary_path: dictionary_path.into(),
            index_path: None,
            catalog_path: None,
            num_words: blinkscribe_core::predict::DEFAULT_NUM_WORDS,
            listen: DEFAULT_LISTEN.parse().expect("valid default address"),
            command_script: None,
            snapshot_log: None,
            stay_after_replay: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check_dwell(self.dwell_ms)?;
        if self.num_words == 0 {
            return Err(ConfigError::NumWords);
        }
        match &self.source {
            SourceConfig::Serial { baud, .. } if !SUPPORTED_BAUD_RATES.contains(baud) => {
                Err(ConfigError::BaudRate(*baud))
            }
            SourceConfig::Replay { speed, .. } if !(speed.is_finite() && *speed >= 0.0) => {
                Err(ConfigError::ReplaySpeed(speed.to_string()))
            }
            _ => Ok(()),
        }
    }

    pub fn is_replay(&self) -> bool {
        matches!(self.source, SourceConfig::Replay { .. })
    }
}

pub fn check_dwell(ms: u64) -> Result<(), ConfigError> {
    if ms < MIN_DWELL_MS {
        return Err(ConfigError::DwellTooShort(ms));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert_eq!(SessionConfig::replay("a", "b").validate(), Ok(()));
    }

    #[test]
    fn dwell_floor() {
        let mut c = SessionConfig::replay("a", "b");
        c.dwell_ms = 99;
        assert_eq!(c.validate(), Err(ConfigError::DwellTooShort(99)));
        c.dwell_ms = 100;
        assert_eq!(c.validate(), Ok(()));
    }

    #[test]
    fn baud_rates() {
        let mut c = SessionConfig::replay("a", "b");
        for baud in SUPPORTED_BAUD_RATES {
            c.source = SourceConfig::Serial {
                port: "/dev/ttyUSB0".into(),
                baud,
            };
            assert_eq!(c.validate(), Ok(()));
        }
        c.source = SourceConfig::Serial {
            port: "COM3".into(),
            baud: 38400,
        };
        assert_eq!(c.validate(), Err(ConfigError::BaudRate(38400)));
    }

    #[test]
    fn replay_speed() {
        let mut c = SessionConfig::replay("a", "b");
        c.source = SourceConfig::Replay {
            path: "a".into(),
            speed: -1.0,
        };
        assert!(matches!(c.validate(), Err(ConfigError::ReplaySpeed(_))));
        c.source = SourceConfig::Replay {
            path: "a".into(),
            speed: f64::NAN,
        };
        assert!(c.validate().is_err());
    }
}
