//! Time series replay for actors driven by recorded data.
//!
//! Files are CSV with a `timestamp,value` header and ISO-8601 timestamps.
//! Between samples the last value holds (zero-order hold).

use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime};
use serde::Deserialize;

use crate::error::{Error, Result};

pub const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

pub fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    let text = text.trim();
    NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S%.f")
        .or_else(|_| NaiveDateTime::parse_from_str(text, "%Y-%m-%d %H:%M:%S%.f"))
        .ok()
        .or_else(|| DateTime::parse_from_rfc3339(text).ok().map(|t| t.naive_utc()))
}

pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format(TIME_FORMAT).to_string()
}

/// Serde adapter for timestamps in config files: accepts ISO-8601 strings and
/// native TOML datetimes, writes [`TIME_FORMAT`] strings.
pub mod serde_timestamp {
    use chrono::NaiveDateTime;
    use serde::{de, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Text(String),
        Toml(toml::value::Datetime),
    }

    pub fn serialize<S: Serializer>(t: &NaiveDateTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_timestamp(*t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDateTime, D::Error> {
        let text = match Raw::deserialize(d)? {
            Raw::Text(s) => s,
            Raw::Toml(t) => t.to_string(),
        };
        super::parse_timestamp(&text)
            .ok_or_else(|| de::Error::custom(format!("invalid timestamp `{text}`")))
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    timestamp: String,
    value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    source: PathBuf,
    times: Vec<NaiveDateTime>,
    values: Vec<f64>,
}

impl Trace {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, path)
    }

    /// Parses CSV text; `source` is only used in error messages.
    pub fn from_csv_str(text: &str, source: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Trace {
            path: source.to_owned(),
            reason,
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let (mut times, mut values) = (Vec::new(), Vec::new());
        for (line, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| bad(e.to_string()))?;
            let t = parse_timestamp(&row.timestamp)
                .ok_or_else(|| bad(format!("row {}: bad timestamp `{}`", line + 1, row.timestamp)))?;
            if !row.value.is_finite() {
                return Err(bad(format!("row {}: value is not finite", line + 1)));
            }
            if let Some(prev) = times.last() {
                if t <= *prev {
                    return Err(bad(format!("row {}: timestamps must increase", line + 1)));
                }
            }
            times.push(t);
            values.push(row.value);
        }
        if times.is_empty() {
            return Err(bad("no samples".into()));
        }
        Ok(Self {
            source: source.to_owned(),
            times,
            values,
        })
    }

    pub fn first(&self) -> NaiveDateTime {
        self.times[0]
    }

    pub fn last(&self) -> NaiveDateTime {
        *self.times.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Errors unless every instant in `[from, to]` has a sample at or before it
    /// and `to` does not lie past the last sample.
    pub fn ensure_covers(&self, from: NaiveDateTime, to: NaiveDateTime) -> Result<()> {
        if from < self.first() || to > self.last() {
            return Err(Error::TraceUnderrun {
                first: format_timestamp(self.first()),
                last: format_timestamp(self.last()),
                needed_from: format_timestamp(from),
                needed_to: format_timestamp(to),
            });
        }
        Ok(())
    }

    /// Zero-order-hold value at `t`.
    pub fn value_at(&self, t: NaiveDateTime) -> Result<f64> {
        let idx = self.times.partition_point(|s| *s <= t);
        if idx == 0 || t > self.last() {
            return Err(Error::TraceUnderrun {
                first: format_timestamp(self.first()),
                last: format_timestamp(self.last()),
                needed_from: format_timestamp(t),
                needed_to: format_timestamp(t),
            });
        }
        Ok(self.values[idx - 1])
    }

    pub fn source(&self) -> &Path {
        &self.source
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> NaiveDateTime {
        parse_timestamp(s).unwrap()
    }

    const CSV: &str = "timestamp,value\n2021-06-15T00:00:00,0\n2021-06-15T00:10:00,120.5\n2021-06-15T00:20:00,300\n";

    #[test]
    fn zero_order_hold() {
        let trace = Trace::from_csv_str(CSV, Path::new("mem")).unwrap();
        assert_eq!(trace.value_at(t("2021-06-15T00:00:00")).unwrap(), 0.0);
        assert_eq!(trace.value_at(t("2021-06-15T00:09:59")).unwrap(), 0.0);
        assert_eq!(trace.value_at(t("2021-06-15T00:10:00")).unwrap(), 120.5);
        assert_eq!(trace.value_at(t("2021-06-15T00:19:00")).unwrap(), 120.5);
        assert_eq!(trace.value_at(t("2021-06-15T00:20:00")).unwrap(), 300.0);
    }

    #[test]
    fn coverage() {
        let trace = Trace::from_csv_str(CSV, Path::new("mem")).unwrap();
        assert!(trace
            .ensure_covers(t("2021-06-15T00:00:00"), t("2021-06-15T00:20:00"))
            .is_ok());
        assert!(matches!(
            trace.ensure_covers(t("2021-06-15T00:00:00"), t("2021-06-15T00:21:00")),
            Err(Error::TraceUnderrun { .. })
        ));
        assert!(trace.value_at(t("2021-06-14T23:59:00")).is_err());
        assert!(trace.value_at(t("2021-06-15T00:20:01")).is_err());
    }

    #[test]
    fn timestamp_formats() {
        assert_eq!(t("2021-06-15 11:00:00"), t("2021-06-15T11:00:00"));
        assert_eq!(t("2021-06-15T11:00:00Z"), t("2021-06-15T11:00:00"));
        assert_eq!(t("2021-06-15T13:00:00+02:00"), t("2021-06-15T11:00:00"));
        assert!(parse_timestamp("yesterday").is_none());
    }

    #[test]
    fn rejects_malformed() {
        let p = Path::new("mem");
        assert!(Trace::from_csv_str("timestamp,value\n", p).is_err());
        assert!(Trace::from_csv_str("timestamp,value\nnope,1\n", p).is_err());
        assert!(Trace::from_csv_str(
            "timestamp,value\n2021-06-15T00:10:00,1\n2021-06-15T00:00:00,1\n",
            p
        )
        .is_err());
    }
}
