use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use blinkscribe_client::{Client, ClientError, LiveClient};
use blinkscribe_core::predict::{build_index, is_code, Dictionary, SearchBudget, T6Trie};
use blinkscribe_core::protocol::{DataRow, ProtocolError, StreamParser};
use blinkscribe_core::signal::{BlinkDetector, DetectorConfig};
use blinkscribe_core::wire::{ClientMessage, ServerMessage, Snapshot};
use blinkscribe_service::config::{DEFAULT_DWELL_MS, DEFAULT_LISTEN, DEFAULT_THRESHOLD};
use blinkscribe_service::replay::open_capture;
use blinkscribe_service::{SessionConfig, SourceConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "blinkscribe", version, about = "Blink-driven text entry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Start a session on a headset or a replay capture.
    Run(RunArgs),
    /// Precompute suggestions for every reachable code up to a length.
    BuildIndex {
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        max_len: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Print suggestions for a digit prefix, one word per line.
    Suggest {
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        prefix: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Stop after visiting this many trie nodes (default: no limit).
        #[arg(long)]
        max_search: Option<usize>,
    },
    /// Print decoded rows and detected blinks from a capture.
    Inspect {
        #[arg(long)]
        replay: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: u8,
        #[arg(long, default_value_t = 500)]
        refractory_ms: u64,
    },
    /// Send one simulated blink to a running session.
    Blink(ServerArg),
    /// Print the current snapshot as JSON.
    Snapshot(ServerArg),
    SetThreshold {
        value: i64,
        #[command(flatten)]
        server: ServerArg,
    },
    SetDwell {
        ms: i64,
        #[command(flatten)]
        server: ServerArg,
    },
    /// Stream snapshots and events as JSON lines until the session closes.
    Watch(ServerArg),
}

#[derive(Debug, Args)]
struct ServerArg {
    #[arg(long, env = "BLINKSCRIBE_SERVER", default_value = DEFAULT_LISTEN)]
    server: String,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Serial device of the headset dongle.
    #[arg(long, conflicts_with = "replay", required_unless_present = "replay")]
    port: Option<String>,
    #[arg(long, default_value_t = 57600, requires = "port")]
    baud: u32,
    /// JSONL capture to replay instead of a device.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Replay pacing; 1 is real time, 0 as fast as possible.
    #[arg(long, default_value_t = 1.0, requires = "replay")]
    speed: f64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u8,
    #[arg(long, default_value_t = DEFAULT_DWELL_MS)]
    dwell_ms: u64,
    #[arg(long, default_value_t = 500)]
    refractory_ms: u64,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    num_words: usize,
    #[arg(long, env = "BLINKSCRIBE_LISTEN", default_value = DEFAULT_LISTEN)]
    listen: SocketAddr,
    /// JSONL of timed client commands applied on the replay clock.
    #[arg(long, requires = "replay")]
    commands: Option<PathBuf>,
    /// Write every published message as a JSON line.
    #[arg(long)]
    snapshot_log: Option<PathBuf>,
    /// Keep serving on the wall clock after the replay ends.
    #[arg(long, requires = "replay")]
    stay: bool,
}

impl RunArgs {
    fn into_config(self) -> SessionConfig {
        let source = match (self.port, self.replay) {
            (Some(port), _) => SourceConfig::Serial {
                port,
                baud: self.baud,
            },
            (None, Some(path)) => SourceConfig::Replay {
                path,
                speed: self.speed,
            },
            (None, None) => unreachable!("clap requires one source"),
        };
        SessionConfig {
            source,
            blink_threshold: self.threshold,
            refractory_ms: self.refractory_ms,
            dwell_ms: self.dwell_ms,
            dictionary_path: self.dict,
            index_path: self.index,
            catalog_path: self.catalog,
            num_words: self.num_words,
            listen: self.listen,
            command_script: self.commands,
            snapshot_log: self.snapshot_log,
            stay_after_replay: self.stay,
        }
    }
}

/// An error plus the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn input(error: anyhow::Error) -> Self {
        Self { code: 2, error }
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        let code = match e {
            ClientError::Http(_) | ClientError::WebSocket(_) => 3,
            _ => 1,
        };
        Self {
            code,
            error: e.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let result = match cli.command {
        Command::Run(args) => run_session(args),
        Command::BuildIndex {
            dict,
            max_len,
            out,
            k,
        } => cmd_build_index(&dict, max_len, &out, k).map_err(Failure::input),
        Command::Suggest {
            dict,
            prefix,
            k,
            max_search,
        } => cmd_suggest(&dict, &prefix, k, max_search).map_err(Failure::input),
        Command::Inspect {
            replay,
            threshold,
            refractory_ms,
        } => cmd_inspect(
            &replay,
            DetectorConfig {
                threshold,
                refractory_ms,
            },
        ),
        Command::Blink(s) => remote(&s.server, ClientMessage::SimBlink),
        Command::Snapshot(s) => remote(&s.server, ClientMessage::GetSnapshot),
        Command::SetThreshold { value, server } => {
            remote(&server.server, ClientMessage::SetThreshold { value })
        }
        Command::SetDwell { ms, server } => remote(&server.server, ClientMessage::SetDwell { ms }),
        Command::Watch(s) => watch(&s.server),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Runtime::new().expect("tokio runtime")
}

fn run_session(args: RunArgs) -> Result<(), Failure> {
    let config = args.into_config();
    let summary = runtime()
        .block_on(async {
            let ctrl_c = async {
                let _ = tokio::signal::ctrl_c().await;
            };
            blinkscribe_service::run(config, ctrl_c).await
        })
        .map_err(|e| Failure {
            code: e.exit_code() as u8,
            error: e.into(),
        })?;
    let s = summary.stats;
    println!(
        "session ended: blinks={} packets={} checksum_failures={} desync_events={} truncated_rows={} texts={}",
        s.blinks,
        s.packets,
        s.checksum_failures,
        s.desync_events,
        s.truncated_rows,
        summary.texts.len()
    );
    for text in &summary.texts {
        println!("text: {text}");
    }
    Ok(())
}

fn load_trie(dict: &Path) -> anyhow::Result<T6Trie> {
    let (dictionary, report) = Dictionary::load(dict).context("dictionary")?;
    if !report.rejected.is_empty() {
        eprintln!(
            "warning: {} skipped dictionary entries outside a-z",
            report.rejected.len()
        );
    }
    Ok(T6Trie::build(&dictionary)?)
}

fn cmd_build_index(dict: &Path, max_len: usize, out: &Path, k: usize) -> anyhow::Result<()> {
    if k == 0 {
        bail!("--k must be positive");
    }
    let index = build_index(&load_trie(dict)?, max_len, k);
    index.write(out).context("index")?;
    eprintln!("wrote {} records to {}", index.len(), out.display());
    Ok(())
}

fn cmd_suggest(
    dict: &Path,
    prefix: &str,
    k: usize,
    max_search: Option<usize>,
) -> anyhow::Result<()> {
    if !is_code(prefix) {
        bail!("prefix {prefix:?} must use digits 1-6");
    }
    let budget = match max_search {
        Some(n) => SearchBudget::new(k, n)?,
        None if k == 0 => bail!("--k must be positive"),
        None => SearchBudget::unbounded(k),
    };
    let mut out = String::new();
    for s in load_trie(dict)?.suggest(prefix, budget) {
        out.push_str(&s.word);
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

fn describe(row: &DataRow) -> String {
    match row {
        DataRow::PoorSignal(v) => format!("poor_signal {v}"),
        DataRow::BlinkStrength(v) => format!("blink_strength {v}"),
        DataRow::RawSample(v) => format!("raw {v}"),
        DataRow::EegPower(b) => format!(
            "eeg_power delta={} theta={} low_alpha={} high_alpha={} low_beta={} high_beta={} low_gamma={} mid_gamma={}",
            b.delta, b.theta, b.low_alpha, b.high_alpha, b.low_beta, b.high_beta, b.low_gamma, b.mid_gamma
        ),
        DataRow::Unknown { code, value } => {
            format!("unknown 0x{code:02X} {}", hex::encode_upper(value))
        }
    }
}

/// Line format, one per item:
/// `<t_ms> row <name> <values>`, `<t_ms> blink strength=<n>`,
/// `<t_ms> error <message>`, then a final `summary ...` line.
fn cmd_inspect(replay: &Path, config: DetectorConfig) -> Result<(), Failure> {
    let records = open_capture(replay).map_err(|e| Failure::input(e.into()))?;
    let mut parser = StreamParser::new();
    let mut detector = BlinkDetector::new(config);
    let mut blinks = 0u64;
    let mut truncated = 0u64;
    let mut out = std::io::BufWriter::new(std::io::stdout().lock());
    let mut line = String::new();
    for record in records {
        let record = record.map_err(|e| Failure {
            code: 1,
            error: e.into(),
        })?;
        let t = record.t_ms;
        for packet in parser.feed_bytes(&record.data) {
            let decoded = packet.rows();
            for row in &decoded.rows {
                line.clear();
                let _ = write!(line, "{t} row {}", describe(row));
                emit(&mut out, &line)?;
                let event = detector.observe(row, t).map_err(|e| Failure {
                    code: 1,
                    error: e.into(),
                })?;
                if let Some(ev) = event {
                    blinks += 1;
                    emit(&mut out, &format!("{t} blink strength={}", ev.strength))?;
                }
            }
            if let Some(err) = decoded.error {
                if matches!(err, ProtocolError::TruncatedRow { .. }) {
                    truncated += 1;
                }
                emit(&mut out, &format!("{t} error {err}"))?;
            }
        }
    }
    let s = parser.stats();
    emit(
        &mut out,
        &format!(
            "summary packets={} checksum_failures={} desync_events={} discarded_bytes={} truncated_rows={truncated} blinks={blinks}",
            s.packets, s.checksum_failures, s.desync_events, s.discarded_bytes
        ),
    )
}

fn emit(out: &mut impl std::io::Write, line: &str) -> Result<(), Failure> {
    writeln!(out, "{line}").map_err(|e| Failure {
        code: 1,
        error: e.into(),
    })
}

fn remote(server: &str, cmd: ClientMessage) -> Result<(), Failure> {
    let client = Client::new(server);
    let reply: Option<Snapshot> = runtime().block_on(client.command(&cmd))?;
    if let Some(snapshot) = reply {
        println!("{}", ServerMessage::Snapshot(snapshot).to_json());
    }
    Ok(())
}

fn watch(server: &str) -> Result<(), Failure> {
    runtime().block_on(async {
        let mut live = LiveClient::connect(server).await?;
        while let Some(msg) = live.next().await {
            println!("{}", msg?.to_json());
        }
        Ok(())
    })
}
