//! Append-only, tab-separated metric history and trend assessment.
//!
//! One record per line: `run-id \t timestamp \t entity \t metric \t value`.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};

use crate::assess::{Assessment, Color};

#[derive(Debug, thiserror::Error)]
pub enum HistoryError {
    #[error("run `{0}` is already recorded in the history store")]
    DuplicateRun(String),
    #[error("history store {path} is corrupt at line {line}: {message}")]
    CorruptStore {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("history store {0} is locked by another run (remove {0}.lock if stale)")]
    Locked(PathBuf),
    #[error("invalid history record: {0}")]
    InvalidRecord(String),
    #[error("history store {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HistoryError + '_ {
    move |source| HistoryError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRecord {
    pub run_id: String,
    pub timestamp: DateTime<Utc>,
    pub entity: String,
    pub metric: String,
    pub value: f64,
}

impl SnapshotRecord {
    fn line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\n",
            self.run_id,
            self.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
            self.entity,
            self.metric,
            self.value
        )
    }

    fn parse(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split('\t').collect();
        let [run_id, ts, entity, metric, value] = fields[..] else {
            return Err(format!("expected 5 tab-separated fields, found {}", fields.len()));
        };
        if run_id.is_empty() || metric.is_empty() {
            return Err("empty run-id or metric".into());
        }
        let timestamp = DateTime::parse_from_rfc3339(ts)
            .map_err(|e| format!("bad timestamp `{ts}`: {e}"))?
            .with_timezone(&Utc);
        let value = f64::from_str(value).map_err(|_| format!("bad value `{value}`"))?;
        Ok(SnapshotRecord {
            run_id: run_id.into(),
            timestamp,
            entity: entity.into(),
            metric: metric.into(),
            value,
        })
    }
}

fn check_field(what: &str, s: &str) -> Result<(), HistoryError> {
    if s.contains(['\t', '\n', '\r']) {
        return Err(HistoryError::InvalidRecord(format!("{what} `{s}` contains a tab or newline")));
    }
    Ok(())
}

fn validate(run_id: &str, records: &[(String, String, f64)]) -> Result<(), HistoryError> {
    check_field("run-id", run_id)?;
    if run_id.is_empty() {
        return Err(HistoryError::InvalidRecord("empty run-id".into()));
    }
    for (entity, metric, value) in records {
        check_field("entity", entity)?;
        check_field("metric", metric)?;
        if metric.is_empty() {
            return Err(HistoryError::InvalidRecord("empty metric id".into()));
        }
        if !value.is_finite() {
            return Err(HistoryError::InvalidRecord(format!("{metric} of `{entity}` is {value}")));
        }
    }
    Ok(())
}

/// Records read from a store, in file order.
#[derive(Debug, Clone, Default)]
pub struct StoreContents {
    pub records: Vec<SnapshotRecord>,
    /// First corrupt line, if the store was salvaged.
    pub corrupt_line: Option<(usize, String)>,
    pub warnings: Vec<String>,
}

impl StoreContents {
    pub fn run_ids(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.run_id.as_str()).collect()
    }
}

/// Reads a store, salvaging the intact prefix if a line is malformed.
/// A missing file is an empty store.
pub fn read_store(path: &Path) -> Result<StoreContents, HistoryError> {
    let text = match fs::read(path) {
        Ok(bytes) => bytes,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(StoreContents::default()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let text = String::from_utf8_lossy(&text);
    let mut out = StoreContents::default();
    let ends_with_newline = text.is_empty() || text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    for (idx, line) in lines.iter().enumerate() {
        let number = idx + 1;
        let truncated = idx + 1 == lines.len() && !ends_with_newline;
        let parsed = if truncated {
            Err("truncated final line".to_string())
        } else {
            SnapshotRecord::parse(line)
        };
        match parsed {
            Ok(r) => out.records.push(r),
            Err(message) => {
                out.warnings.push(format!(
                    "history store {} is corrupt at line {number} ({message}); using the {} records before it",
                    path.display(),
                    out.records.len()
                ));
                out.corrupt_line = Some((number, message));
                break;
            }
        }
    }
    Ok(out)
}

/// Exclusive writer access, released on drop.
#[derive(Debug)]
pub struct StoreLock {
    store: PathBuf,
    path: PathBuf,
}

impl StoreLock {
    pub fn store(&self) -> &Path {
        &self.store
    }

    pub fn acquire(store: &Path) -> Result<Self, HistoryError> {
        let mut lock = store.as_os_str().to_owned();
        lock.push(".lock");
        let path = PathBuf::from(lock);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(StoreLock {
                    store: store.to_path_buf(),
                    path,
                })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(HistoryError::Locked(store.to_path_buf())),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

impl Drop for StoreLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Appends one run. Returns warnings (timestamp regression).
pub fn append_snapshot(
    store: &Path,
    run_id: &str,
    timestamp: DateTime<Utc>,
    records: &[(String, String, f64)],
) -> Result<Vec<String>, HistoryError> {
    validate(run_id, records)?;
    let lock = StoreLock::acquire(store)?;
    append_snapshot_locked(&lock, run_id, timestamp, records)
}

/// Like [`append_snapshot`], for a caller already holding the store lock.
pub fn append_snapshot_locked(
    lock: &StoreLock,
    run_id: &str,
    timestamp: DateTime<Utc>,
    records: &[(String, String, f64)],
) -> Result<Vec<String>, HistoryError> {
    let store = lock.store.as_path();
    validate(run_id, records)?;
    let existing = read_store(store)?;
    if let Some((line, message)) = existing.corrupt_line {
        return Err(HistoryError::CorruptStore {
            path: store.to_path_buf(),
            line,
            message,
        });
    }
    if existing.records.iter().any(|r| r.run_id == run_id) {
        return Err(HistoryError::DuplicateRun(run_id.into()));
    }
    let mut warnings = Vec::new();
    if let Some(last) = existing.records.iter().map(|r| r.timestamp).max() {
        if timestamp < last {
            warnings.push(format!(
                "timestamp regression: run `{run_id}` at {} precedes stored run at {}; series are reordered on read",
                timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
                last.to_rfc3339_opts(SecondsFormat::Secs, true)
            ));
        }
    }
    let mut seen = BTreeSet::new();
    let mut text = String::new();
    for (entity, metric, value) in records {
        if !seen.insert((entity, metric)) {
            return Err(HistoryError::InvalidRecord(format!(
                "duplicate record for `{metric}` of `{entity}` in run `{run_id}`"
            )));
        }
        text.push_str(
            &SnapshotRecord {
                run_id: run_id.into(),
                timestamp,
                entity: entity.clone(),
                metric: metric.clone(),
                value: *value,
            }
            .line(),
        );
    }
    let mut file: File = OpenOptions::new()
        .create(true)
        .append(true)
        .open(store)
        .map_err(io_err(store))?;
    file.write_all(text.as_bytes()).map_err(io_err(store))?;
    file.sync_all().map_err(io_err(store))?;
    Ok(warnings)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendPoint {
    pub run_id: String,
    pub timestamp: DateTime<Utc>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendSeries {
    pub metric: String,
    pub entity: String,
    pub points: Vec<TrendPoint>,
}

impl TrendSeries {
    pub fn from_records(records: &[SnapshotRecord], metric: &str, entity: &str) -> Self {
        let mut points: Vec<TrendPoint> = records
            .iter()
            .filter(|r| r.metric == metric && r.entity == entity)
            .map(|r| TrendPoint {
                run_id: r.run_id.clone(),
                timestamp: r.timestamp,
                value: r.value,
            })
            .collect();
        points.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.run_id.cmp(&b.run_id)));
        TrendSeries {
            metric: metric.into(),
            entity: entity.into(),
            points,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }
}

/// Loads one series; salvage warnings are returned alongside.
pub fn load_series(store: &Path, metric: &str, entity: &str) -> Result<(TrendSeries, Vec<String>), HistoryError> {
    let contents = read_store(store)?;
    Ok((TrendSeries::from_records(&contents.records, metric, entity), contents.warnings))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrendKind {
    MustNotIncrease,
    MustNotDecrease,
}

impl TrendKind {
    pub const NAMES: [&'static str; 2] = ["MUST_NOT_INCREASE", "MUST_NOT_DECREASE"];
}

impl FromStr for TrendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "MUST_NOT_INCREASE" => Ok(TrendKind::MustNotIncrease),
            "MUST_NOT_DECREASE" => Ok(TrendKind::MustNotDecrease),
            _ => Err(format!("unknown trend kind `{s}` (expected one of {})", Self::NAMES.join(", "))),
        }
    }
}

impl fmt::Display for TrendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrendKind::MustNotIncrease => "MUST_NOT_INCREASE",
            TrendKind::MustNotDecrease => "MUST_NOT_DECREASE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendRule {
    pub metric: String,
    pub kind: TrendKind,
    pub tolerance: f64,
}

impl TrendRule {
    pub fn new(metric: impl Into<String>, kind: TrendKind, tolerance: f64) -> Result<Self, String> {
        if !(tolerance >= 0.0 && tolerance.is_finite()) {
            return Err(format!("tolerance must be a finite value >= 0, got {tolerance}"));
        }
        Ok(TrendRule {
            metric: metric.into(),
            kind,
            tolerance,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendVerdict {
    pub assessment: Assessment,
    pub delta: f64,
}

/// Compares the last point against the previous one.
pub fn assess_trend(series: &TrendSeries, rule: &TrendRule) -> TrendVerdict {
    let n = series.points.len();
    if n < 2 {
        return TrendVerdict {
            assessment: Assessment {
                color: Color::Green,
                message: Some(format!("insufficient history ({n} point{})", if n == 1 { "" } else { "s" })),
            },
            delta: 0.0,
        };
    }
    let delta = series.points[n - 1].value - series.points[n - 2].value;
    let worsening = match rule.kind {
        TrendKind::MustNotIncrease => delta,
        TrendKind::MustNotDecrease => -delta,
    };
    let color = if worsening <= rule.tolerance { Color::Green } else { Color::Red };
    TrendVerdict {
        assessment: Assessment {
            color,
            message: Some(format!("{} delta {delta:+} ({}, tolerance {})", rule.metric, rule.kind, rule.tolerance)),
        },
        delta,
    }
}
