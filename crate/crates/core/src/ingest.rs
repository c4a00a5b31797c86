//! Raw operations data into uniform timestamped key-value records.
//!
//! Parsing is purely syntactic: values stay strings, nested JSON is flattened
//! into dotted keys, and malformed lines are skipped and counted rather than
//! aborting the stream.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::time::{Micros, TimestampFormat};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error reading {origin}: {source}")]
    Io {
        origin: String,
        #[source]
        source: std::io::Error,
    },
    #[error("input not found: {0}")]
    NotFound(PathBuf),
}

/// The data source a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceType {
    Db,
    Libvirt,
    Ovs,
    Cephimage,
    Cephfile,
    Cephlog,
    Log,
}

impl SourceType {
    pub const ALL: [SourceType; 7] = [
        SourceType::Db,
        SourceType::Libvirt,
        SourceType::Ovs,
        SourceType::Cephimage,
        SourceType::Cephfile,
        SourceType::Cephlog,
        SourceType::Log,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceType::Db => "DB",
            SourceType::Libvirt => "Libvirt",
            SourceType::Ovs => "Ovs",
            SourceType::Cephimage => "Cephimage",
            SourceType::Cephfile => "Cephfile",
            SourceType::Cephlog => "Cephlog",
            SourceType::Log => "Log",
        }
    }

    /// Log-like sources produce events; everything else produces states.
    pub fn is_event(self) -> bool {
        matches!(self, SourceType::Log | SourceType::Cephlog)
    }

    /// Periodic snapshot sources (candidates for duplicate collapsing).
    pub fn is_snapshot(self) -> bool {
        !self.is_event() && self != SourceType::Db
    }
}

impl fmt::Display for SourceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceType {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SourceType::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| IngestError::Config(format!("unknown source type `{s}`")))
    }
}

impl Serialize for SourceType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for SourceType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Where a record was read from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Origin {
    pub file: String,
    pub line: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub source: SourceType,
    pub timestamp: Micros,
    pub props: BTreeMap<String, String>,
    pub origin: Origin,
}

/// Supported input formats and their timestamp location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FormatSpec {
    /// One JSON object per line.
    Jsonl {
        timestamp_key: String,
        #[serde(default)]
        timestamp_format: TimestampFormat,
    },
    /// Delimiter-separated values with a header row.
    Csv {
        timestamp_column: String,
        #[serde(default)]
        timestamp_format: TimestampFormat,
        #[serde(default = "default_delimiter")]
        delimiter: char,
    },
    /// `<ts>\t<table>\t<INSERT|UPDATE|DELETE>\t<json columns>`
    #[serde(rename = "dbdump")]
    DbDump {
        #[serde(default)]
        timestamp_format: TimestampFormat,
    },
    /// `<ts> <severity> <component> <free text>`
    Syslog {
        #[serde(default)]
        timestamp_format: TimestampFormat,
    },
}

fn default_delimiter() -> char {
    ','
}

impl FormatSpec {
    pub fn name(&self) -> &'static str {
        match self {
            FormatSpec::Jsonl { .. } => "jsonl",
            FormatSpec::Csv { .. } => "csv",
            FormatSpec::DbDump { .. } => "dbdump",
            FormatSpec::Syslog { .. } => "syslog",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseStats {
    pub total: u64,
    pub parsed: u64,
    pub skipped_malformed: u64,
    pub skipped_no_timestamp: u64,
}

impl ParseStats {
    pub fn merge(&mut self, other: &ParseStats) {
        self.total += other.total;
        self.parsed += other.parsed;
        self.skipped_malformed += other.skipped_malformed;
        self.skipped_no_timestamp += other.skipped_no_timestamp;
    }
}

enum LineOutcome {
    Parsed(Micros, BTreeMap<String, String>),
    Malformed,
    NoTimestamp,
}

/// Parses one input stream. Blank lines are not records and are not counted.
pub fn parse_source<R: Read>(
    input: R,
    source: SourceType,
    format: &FormatSpec,
    origin: &str,
) -> Result<(Vec<Record>, ParseStats), IngestError> {
    match format {
        FormatSpec::Csv {
            timestamp_column,
            timestamp_format,
            delimiter,
        } => parse_csv(input, source, timestamp_column, timestamp_format, *delimiter, origin),
        _ => parse_lines(input, source, format, origin),
    }
}

fn parse_lines<R: Read>(
    input: R,
    source: SourceType,
    format: &FormatSpec,
    origin: &str,
) -> Result<(Vec<Record>, ParseStats), IngestError> {
    let mut reader = BufReader::new(input);
    let mut buf = Vec::new();
    let mut records = Vec::new();
    let mut stats = ParseStats::default();
    let mut line_no = 0u64;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(|e| IngestError::Io {
            origin: origin.to_string(),
            source: e,
        })?;
        if n == 0 {
            break;
        }
        line_no += 1;
        while matches!(buf.last(), Some(b'\n' | b'\r')) {
            buf.pop();
        }
        let outcome = match std::str::from_utf8(&buf) {
            Ok(line) if line.trim().is_empty() => continue,
            Ok(line) => match format {
                FormatSpec::Jsonl {
                    timestamp_key,
                    timestamp_format,
                } => jsonl_line(line, timestamp_key, timestamp_format),
                FormatSpec::DbDump { timestamp_format } => dbdump_line(line, timestamp_format),
                FormatSpec::Syslog { timestamp_format } => syslog_line(line, timestamp_format),
                FormatSpec::Csv { .. } => unreachable!("csv is parsed by parse_csv"),
            },
            Err(_) => LineOutcome::Malformed,
        };
        stats.total += 1;
        match outcome {
            LineOutcome::Parsed(timestamp, props) => {
                stats.parsed += 1;
                records.push(Record {
                    source,
                    timestamp,
                    props,
                    origin: Origin {
                        file: origin.to_string(),
                        line: line_no,
                    },
                });
            }
            LineOutcome::Malformed => stats.skipped_malformed += 1,
            LineOutcome::NoTimestamp => stats.skipped_no_timestamp += 1,
        }
    }
    Ok((records, stats))
}

fn jsonl_line(line: &str, ts_key: &str, ts_format: &TimestampFormat) -> LineOutcome {
    let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(line) else {
        return LineOutcome::Malformed;
    };
    let mut props = BTreeMap::new();
    let mut ts_raw = None;
    for (k, v) in &obj {
        if k == ts_key {
            ts_raw = scalar_string(v);
        } else {
            flatten_into(k, v, &mut props);
        }
    }
    if props.is_empty() {
        return LineOutcome::Malformed;
    }
    match ts_raw.and_then(|raw| ts_format.parse(&raw)) {
        Some(ts) => LineOutcome::Parsed(ts, props),
        None => LineOutcome::NoTimestamp,
    }
}

fn dbdump_line(line: &str, ts_format: &TimestampFormat) -> LineOutcome {
    let mut parts = line.splitn(4, '\t');
    let (Some(ts_raw), Some(table), Some(op), Some(body)) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return LineOutcome::Malformed;
    };
    let table = table.trim();
    let op = op.trim();
    if table.is_empty() || !matches!(op, "INSERT" | "UPDATE" | "DELETE") {
        return LineOutcome::Malformed;
    }
    let Ok(Value::Object(cols)) = serde_json::from_str::<Value>(body) else {
        return LineOutcome::Malformed;
    };
    let mut props = BTreeMap::new();
    for (k, v) in &cols {
        flatten_into(k, v, &mut props);
    }
    props.insert("table".to_string(), table.to_string());
    props.insert("op".to_string(), op.to_string());
    match ts_format.parse(ts_raw) {
        Some(ts) => LineOutcome::Parsed(ts, props),
        None => LineOutcome::NoTimestamp,
    }
}

fn syslog_line(line: &str, ts_format: &TimestampFormat) -> LineOutcome {
    let line = line.trim_start();
    let mut rest = line;
    let mut fields = [""; 3];
    for field in fields.iter_mut() {
        rest = rest.trim_start();
        if rest.is_empty() {
            return LineOutcome::Malformed;
        }
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        *field = &rest[..end];
        rest = &rest[end..];
    }
    let [ts_raw, severity, component] = fields;
    let mut props = BTreeMap::new();
    props.insert("severity".to_string(), severity.to_string());
    props.insert("component".to_string(), component.to_string());
    props.insert("message".to_string(), rest.trim().to_string());
    match ts_format.parse(ts_raw) {
        Some(ts) => LineOutcome::Parsed(ts, props),
        None => LineOutcome::NoTimestamp,
    }
}

fn parse_csv<R: Read>(
    input: R,
    source: SourceType,
    ts_column: &str,
    ts_format: &TimestampFormat,
    delimiter: char,
    origin: &str,
) -> Result<(Vec<Record>, ParseStats), IngestError> {
    if !delimiter.is_ascii() {
        return Err(IngestError::Config(format!(
            "csv delimiter must be ascii, got {delimiter:?}"
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .flexible(true)
        .has_headers(false)
        .from_reader(input);
    let mut records = Vec::new();
    let mut stats = ParseStats::default();
    let mut header: Option<Vec<String>> = None;
    let mut ts_idx = 0;
    let mut row = csv::ByteRecord::new();
    loop {
        match reader.read_byte_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => match e.kind() {
                csv::ErrorKind::Io(_) => {
                    let csv::ErrorKind::Io(io) = e.into_kind() else { unreachable!() };
                    return Err(IngestError::Io {
                        origin: origin.to_string(),
                        source: io,
                    });
                }
                _ => {
                    if header.is_some() {
                        stats.total += 1;
                        stats.skipped_malformed += 1;
                    }
                    continue;
                }
            },
        }
        if row.len() == 1 && row.get(0).map_or(true, |f| f.is_empty()) {
            continue;
        }
        let line = row.position().map_or(0, |p| p.line());
        let Some(cols) = header.as_ref() else {
            let cols: Vec<String> = row
                .iter()
                .map(|f| String::from_utf8_lossy(f).trim().to_string())
                .collect();
            ts_idx = cols.iter().position(|c| c == ts_column).ok_or_else(|| {
                IngestError::Config(format!(
                    "{origin}: timestamp column `{ts_column}` not in csv header"
                ))
            })?;
            header = Some(cols);
            continue;
        };
        stats.total += 1;
        if row.len() != cols.len() {
            stats.skipped_malformed += 1;
            continue;
        }
        let Ok(fields) = row
            .iter()
            .map(std::str::from_utf8)
            .collect::<Result<Vec<&str>, _>>()
        else {
            stats.skipped_malformed += 1;
            continue;
        };
        let props: BTreeMap<String, String> = cols
            .iter()
            .zip(&fields)
            .enumerate()
            .filter(|(i, (k, v))| *i != ts_idx && !k.is_empty() && !v.is_empty())
            .map(|(_, (k, v))| (k.clone(), (*v).to_string()))
            .collect();
        if props.is_empty() {
            stats.skipped_malformed += 1;
            continue;
        }
        match ts_format.parse(fields[ts_idx]) {
            Some(timestamp) => {
                stats.parsed += 1;
                records.push(Record {
                    source,
                    timestamp,
                    props,
                    origin: Origin {
                        file: origin.to_string(),
                        line,
                    },
                });
            }
            None => stats.skipped_no_timestamp += 1,
        }
    }
    Ok((records, stats))
}

fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Flattens nested objects and arrays into dotted keys. Nulls carry no value
/// and are dropped.
fn flatten_into(prefix: &str, v: &Value, out: &mut BTreeMap<String, String>) {
    match v {
        Value::Null => {}
        Value::Bool(b) => {
            out.insert(prefix.to_string(), b.to_string());
        }
        Value::Number(n) => {
            out.insert(prefix.to_string(), n.to_string());
        }
        Value::String(s) => {
            out.insert(prefix.to_string(), s.clone());
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                flatten_into(&format!("{prefix}.{i}"), item, out);
            }
        }
        Value::Object(obj) => {
            for (k, item) in obj {
                flatten_into(&format!("{prefix}.{k}"), item, out);
            }
        }
    }
}

/// Collapses runs of consecutive records that agree on source and every
/// property, keeping the earliest.
pub fn dedupe_snapshots(mut records: Vec<Record>) -> Vec<Record> {
    records.dedup_by(|later, earlier| later.source == earlier.source && later.props == earlier.props);
    records
}

/// One entry of the source mapping: files matching `glob` (relative to the
/// corpus root) are parsed as `source` using `format`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub glob: String,
    pub source: SourceType,
    pub format: FormatSpec,
    /// Collapse consecutive duplicate snapshots within each file. Defaults to
    /// true for snapshot sources.
    #[serde(default)]
    pub dedupe: Option<bool>,
}

impl SourceEntry {
    pub fn dedupes(&self) -> bool {
        self.dedupe.unwrap_or_else(|| self.source.is_snapshot())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileReport {
    pub file: String,
    pub source: SourceType,
    pub stats: ParseStats,
    pub deduped: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub files: Vec<FileReport>,
    pub totals: ParseStats,
    pub deduped: u64,
}

/// Parses every file under `root` claimed by `entries` (first matching entry
/// wins). Files are parsed in parallel; output is in (entry, path) order.
pub fn ingest_corpus(
    root: &Path,
    entries: &[SourceEntry],
) -> Result<(Vec<Record>, IngestReport), IngestError> {
    if !root.is_dir() {
        return Err(IngestError::NotFound(root.to_path_buf()));
    }
    let mut claimed = std::collections::BTreeSet::new();
    let mut jobs: Vec<(PathBuf, String, &SourceEntry)> = Vec::new();
    for entry in entries {
        let pattern = root.join(&entry.glob);
        let pattern = pattern.to_string_lossy();
        let paths = glob::glob(&pattern)
            .map_err(|e| IngestError::Config(format!("bad glob `{}`: {e}", entry.glob)))?;
        let mut matched: Vec<PathBuf> = paths
            .filter_map(Result::ok)
            .filter(|p| p.is_file())
            .collect();
        matched.sort();
        for path in matched {
            if claimed.insert(path.clone()) {
                let rel = path
                    .strip_prefix(root)
                    .unwrap_or(&path)
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect::<Vec<_>>()
                    .join("/");
                jobs.push((path, rel, entry));
            }
        }
    }

    let parsed: Vec<Result<(Vec<Record>, FileReport), IngestError>> = jobs
        .par_iter()
        .map(|(path, rel, entry)| {
            let file = File::open(path).map_err(|e| IngestError::Io {
                origin: rel.clone(),
                source: e,
            })?;
            let (records, stats) = parse_source(file, entry.source, &entry.format, rel)?;
            let before = records.len();
            let records = if entry.dedupes() {
                dedupe_snapshots(records)
            } else {
                records
            };
            let report = FileReport {
                file: rel.clone(),
                source: entry.source,
                stats,
                deduped: (before - records.len()) as u64,
            };
            Ok((records, report))
        })
        .collect();

    let mut all = Vec::new();
    let mut report = IngestReport::default();
    for item in parsed {
        let (records, file_report) = item?;
        report.totals.merge(&file_report.stats);
        report.deduped += file_report.deduped;
        report.files.push(file_report);
        all.extend(records);
    }
    Ok((all, report))
}
