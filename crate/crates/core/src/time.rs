//! UTC microsecond timestamps.

use chrono::{DateTime, NaiveDateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};

/// Microseconds since the Unix epoch, UTC.
pub type Micros = i64;

pub const MICROS_PER_SEC: Micros = 1_000_000;

/// How a source encodes its timestamps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampFormat {
    /// RFC 3339 / ISO 8601. A missing offset is read as UTC.
    #[serde(alias = "rfc3339")]
    Iso8601,
    EpochS,
    EpochMs,
    EpochUs,
    /// A chrono `strftime` pattern for a naive UTC date-time.
    Pattern(String),
}

impl Default for TimestampFormat {
    fn default() -> Self {
        TimestampFormat::Iso8601
    }
}

impl TimestampFormat {
    pub fn parse(&self, raw: &str) -> Option<Micros> {
        let raw = raw.trim();
        if raw.is_empty() {
            return None;
        }
        match self {
            TimestampFormat::Iso8601 => parse_iso8601(raw),
            TimestampFormat::EpochS => parse_epoch(raw, MICROS_PER_SEC),
            TimestampFormat::EpochMs => parse_epoch(raw, 1_000),
            TimestampFormat::EpochUs => raw.parse::<i64>().ok(),
            TimestampFormat::Pattern(p) => NaiveDateTime::parse_from_str(raw, p)
                .ok()
                .map(|n| Utc.from_utc_datetime(&n).timestamp_micros()),
        }
    }
}

fn parse_iso8601(raw: &str) -> Option<Micros> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.timestamp_micros());
    }
    for pat in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(n) = NaiveDateTime::parse_from_str(raw, pat) {
            return Some(Utc.from_utc_datetime(&n).timestamp_micros());
        }
    }
    None
}

fn parse_epoch(raw: &str, scale: i64) -> Option<Micros> {
    if let Ok(v) = raw.parse::<i64>() {
        return v.checked_mul(scale);
    }
    let v: f64 = raw.parse().ok()?;
    if !v.is_finite() {
        return None;
    }
    Some((v * scale as f64).round() as i64)
}

/// Formats as `YYYY-MM-DDTHH:MM:SS.ffffffZ`.
pub fn format_micros(ts: Micros) -> String {
    match Utc.timestamp_micros(ts).single() {
        Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Micros, true),
        None => ts.to_string(),
    }
}

pub fn parse_instant(raw: &str) -> Option<Micros> {
    parse_iso8601(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iso_round_trip() {
        let ts = TimestampFormat::Iso8601
            .parse("2026-01-05T10:00:00.123456Z")
            .unwrap();
        assert_eq!(format_micros(ts), "2026-01-05T10:00:00.123456Z");
    }

    #[test]
    fn offsets_normalize_to_utc() {
        let a = TimestampFormat::Iso8601.parse("2026-01-05T12:00:00+02:00").unwrap();
        let b = TimestampFormat::Iso8601.parse("2026-01-05T10:00:00Z").unwrap();
        assert_eq!(a, b);
        let naive = TimestampFormat::Iso8601.parse("2026-01-05 10:00:00").unwrap();
        assert_eq!(naive, b);
    }

    #[test]
    fn epoch_variants() {
        assert_eq!(TimestampFormat::EpochS.parse("2"), Some(2_000_000));
        assert_eq!(TimestampFormat::EpochMs.parse("1.5"), Some(1_500));
        assert_eq!(TimestampFormat::EpochUs.parse("17"), Some(17));
        assert_eq!(TimestampFormat::EpochS.parse("nope"), None);
        assert_eq!(TimestampFormat::Iso8601.parse(""), None);
    }

    #[test]
    fn strftime_pattern() {
        let f = TimestampFormat::Pattern("%d/%m/%Y %H:%M".into());
        assert_eq!(
            f.parse("05/01/2026 10:00"),
            TimestampFormat::Iso8601.parse("2026-01-05T10:00:00Z")
        );
    }
}
