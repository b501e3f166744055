//! Writing and reading step records as CSV or JSON lines.
//!
//! Both formats carry the fixed columns followed by the flattened storage
//! state keys in sorted order. Numbers are written in shortest round-trip
//! form, so reading a file back yields the original records exactly.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::microgrid::StepRecord;
use crate::storage::StorageState;
use crate::trace::{format_timestamp, parse_timestamp};

pub const FIXED_COLUMNS: [&str; 6] = [
    "time",
    "p_delta_w",
    "p_storage_w",
    "e_storage_wh",
    "e_grid_wh",
    "soc",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

impl OutputFormat {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_extension(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => OutputFormat::Jsonl,
            _ => OutputFormat::Csv,
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Jsonl => "jsonl",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            other => Err(Error::InvalidConfig(format!(
                "unknown output format `{other}` (expected csv or jsonl)"
            ))),
        }
    }
}

fn state_columns(records: &[StepRecord]) -> Vec<String> {
    let keys: BTreeSet<&str> = records.iter().flat_map(|r| r.state.keys()).collect();
    keys.into_iter().map(str::to_owned).collect()
}

pub fn write_csv<W: Write>(out: W, records: &[StepRecord]) -> Result<()> {
    let extra = state_columns(records);
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = FIXED_COLUMNS
        .iter()
        .copied()
        .chain(extra.iter().map(String::as_str))
        .collect();
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            format_timestamp(r.time),
            r.p_delta_w.to_string(),
            r.p_storage_w.to_string(),
            r.e_storage_wh.to_string(),
            r.e_grid_wh.to_string(),
            r.soc.to_string(),
        ];
        row.extend(
            extra
                .iter()
                .map(|k| r.state.get(k).map_or_else(String::new, |v| v.to_string())),
        );
        w.write_record(&row)?;
    }
    w.flush().map_err(Error::Write)?;
    Ok(())
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[StepRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(Error::Write)?;
    }
    out.flush().map_err(Error::Write)?;
    Ok(())
}

pub fn write_records(path: &Path, format: OutputFormat, records: &[StepRecord]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let out = BufWriter::new(file);
    match format {
        OutputFormat::Csv => write_csv(out, records),
        OutputFormat::Jsonl => write_jsonl(out, records),
    }
}

fn parse_f64(text: &str, column: &str, row: usize) -> Result<f64> {
    text.trim().parse().map_err(|_| {
        Error::InvalidConfig(format!("row {row}, column `{column}`: `{text}` is not a number"))
    })
}

pub fn read_csv(text: &str) -> Result<Vec<StepRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header.len() < FIXED_COLUMNS.len() || header[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(Error::InvalidConfig(format!(
            "expected leading columns {}",
            FIXED_COLUMNS.join(",")
        )));
    }
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let n = i + 1;
        let num = |c: usize| parse_f64(&row[c], &header[c], n);
        let time = parse_timestamp(&row[0])
            .ok_or_else(|| Error::InvalidConfig(format!("row {n}: bad time `{}`", &row[0])))?;
        let mut state = StorageState::new();
        for c in FIXED_COLUMNS.len()..header.len() {
            if !row[c].is_empty() {
                state.insert(&header[c], num(c)?);
            }
        }
        records.push(StepRecord {
            time,
            p_delta_w: num(1)?,
            p_storage_w: num(2)?,
            e_storage_wh: num(3)?,
            e_grid_wh: num(4)?,
            soc: num(5)?,
            state,
        });
    }
    Ok(records)
}

pub fn read_jsonl(text: &str) -> Result<Vec<StepRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

pub fn read_records(path: &Path, format: OutputFormat) -> Result<Vec<StepRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        OutputFormat::Csv => read_csv(&text),
        OutputFormat::Jsonl => read_jsonl(&text),
    }
}
