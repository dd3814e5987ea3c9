use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use blinkscribe_core::protocol::{checksum, DataRow};
use blinkscribe_service::replay::CaptureBuilder;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_blinkscribe"));
    cmd.env_remove("BLINKSCRIBE_LISTEN").env_remove("RUST_LOG");
    cmd
}

fn sample_words() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/words.txt")
}

fn stdout(out: &Output) -> &str {
    std::str::from_utf8(&out.stdout).unwrap()
}

fn stderr(out: &Output) -> &str {
    std::str::from_utf8(&out.stderr).unwrap()
}

#[test]
fn suggest_prints_one_word_per_line() {
    let out = bin()
        .args(["suggest", "--prefix", "13", "--k", "5", "--dict"])
        .arg(sample_words())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "any\nanswer\n");
}

#[test]
fn suggest_respects_k_and_budget() {
    let out = bin()
        .args(["suggest", "--prefix", "", "--k", "2", "--dict"])
        .arg(sample_words())
        .output()
        .unwrap();
    assert_eq!(stdout(&out), "any\nbye\n");
    let out = bin()
        .args([
            "suggest",
            "--prefix",
            "4",
            "--k",
            "5",
            "--max-search",
            "3",
            "--dict",
        ])
        .arg(sample_words())
        .output()
        .unwrap();
    assert_eq!(stdout(&out), "");
}

#[test]
fn suggest_without_match_prints_nothing() {
    let out = bin()
        .args(["suggest", "--prefix", "6", "--dict"])
        .arg(sample_words())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(stdout(&out), "");
}

#[test]
fn suggest_rejects_non_key_digits() {
    let out = bin()
        .args(["suggest", "--prefix", "19", "--dict"])
        .arg(sample_words())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("\"19\""), "{}", stderr(&out));
}

#[test]
fn missing_dictionary_names_the_path() {
    let out = bin()
        .args([
            "suggest",
            "--prefix",
            "1",
            "--dict",
            "/nonexistent/words.txt",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("/nonexistent/words.txt"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn usage_errors_exit_two() {
    let out = bin().args(["suggest", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["run", "--dict", "x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .args(["run", "--dict", "x", "--port", "p", "--replay", "r"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn build_index_writes_expected_records() {
    let dir = tempfile::tempdir().unwrap();
    let idx = dir.path().join("idx.t6");
    let out = bin()
        .args(["build-index", "--max-len", "2", "--dict"])
        .arg(sample_words())
        .arg("--out")
        .arg(&idx)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&idx).unwrap();
    let codes: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert_eq!(codes, ["1", "4", "13", "15", "42"]);
    assert!(text.lines().any(|l| l == "13\tany,answer"), "{text}");
}

#[test]
fn run_on_empty_replay_reports_zero_blinks() {
    let dir = tempfile::tempdir().unwrap();
    let cap = dir.path().join("empty.jsonl");
    std::fs::write(&cap, "").unwrap();
    let out = bin()
        .args(["run", "--listen", "127.0.0.1:0", "--speed", "0", "--replay"])
        .arg(&cap)
        .arg("--dict")
        .arg(sample_words())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(
        stdout(&out).starts_with("session ended: blinks=0 packets=0"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn run_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cap = dir.path().join("empty.jsonl");
    std::fs::write(&cap, "").unwrap();

    let out = bin()
        .args([
            "run",
            "--listen",
            "127.0.0.1:0",
            "--replay",
            "/nonexistent/cap.jsonl",
            "--dict",
        ])
        .arg(sample_words())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("/nonexistent/cap.jsonl"));

    let out = bin()
        .args([
            "run",
            "--listen",
            "127.0.0.1:0",
            "--dwell-ms",
            "20",
            "--replay",
        ])
        .arg(&cap)
        .arg("--dict")
        .arg(sample_words())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin()
        .args([
            "run",
            "--listen",
            "127.0.0.1:0",
            "--dict",
            "/nonexistent/d.txt",
            "--replay",
        ])
        .arg(&cap)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent/d.txt"));

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(
        &bad,
        "{\"t_ms\":9,\"data\":\"\"}\n{\"t_ms\":1,\"data\":\"\"}\n",
    )
    .unwrap();
    let out = bin()
        .args(["run", "--listen", "127.0.0.1:0", "--speed", "0", "--replay"])
        .arg(&bad)
        .arg("--dict")
        .arg(sample_words())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn listen_env_overrides_default() {
    let dir = tempfile::tempdir().unwrap();
    let cap = dir.path().join("empty.jsonl");
    std::fs::write(&cap, "").unwrap();
    let out = bin()
        .env("BLINKSCRIBE_LISTEN", "not-an-address")
        .args(["run", "--replay"])
        .arg(&cap)
        .arg("--dict")
        .arg(sample_words())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not-an-address"), "{}", stderr(&out));
}

#[test]
fn inspect_golden() {
    let dir = tempfile::tempdir().unwrap();
    let cap = dir.path().join("cap.jsonl");
    let mut b = CaptureBuilder::new();
    b.rows(100, &[DataRow::PoorSignal(26), DataRow::RawSample(-3)])
        .blink(200, 90)
        .blink(300, 120)
        .rows(
            900,
            &[
                DataRow::BlinkStrength(200),
                DataRow::Unknown {
                    code: 0x04,
                    value: vec![0x30],
                },
            ],
        )
        // corrupt packet then a payload that ends mid-row
        .bytes(950, vec![0xAA, 0xAA, 0x02, 0x16, 0x50, 0x00])
        .bytes(
            960,
            vec![0xAA, 0xAA, 0x02, 0x80, 0x02, checksum(&[0x80, 0x02])],
        );
    b.write(&cap).unwrap();
    let out = bin()
        .args(["inspect", "--replay"])
        .arg(&cap)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let expected = "\
100 row poor_signal 26
100 row raw -3
200 row blink_strength 90
200 blink strength=90
300 row blink_strength 120
900 row blink_strength 200
900 blink strength=200
900 row unknown 0x04 30
960 error payload ends mid-row at offset 0 (code 0x80)
summary packets=5 checksum_failures=1 desync_events=0 discarded_bytes=6 truncated_rows=1 blinks=2
";
    assert_eq!(stdout(&out), expected);

    let out = bin()
        .args(["inspect", "--threshold", "150", "--replay"])
        .arg(&cap)
        .output()
        .unwrap();
    let blinks: Vec<&str> = stdout(&out)
        .lines()
        .filter(|l| l.contains(" blink "))
        .collect();
    assert_eq!(blinks, ["900 blink strength=200"]);
}

#[test]
fn inspect_missing_capture_names_the_path() {
    let out = bin()
        .args(["inspect", "--replay", "/nonexistent/x.jsonl"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent/x.jsonl"));
}
