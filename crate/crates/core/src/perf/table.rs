//! CSV and JSON serialization for flat record tables.
//!
//! Column order is the struct field order. Floats are written in shortest
//! round-trip form, so reading a table back yields bit-identical values.

use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned, R: Read>(r: R) -> Result<Vec<T>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn write_json<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, rows)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned, R: Read>(r: R) -> Result<Vec<T>> {
    Ok(serde_json::from_reader(r)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    /// `.json` is JSON; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => TableFormat::Json,
            _ => TableFormat::Csv,
        }
    }
}

pub fn to_bytes<T: Serialize>(rows: &[T], format: TableFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        TableFormat::Csv => write_csv(rows, &mut buf)?,
        TableFormat::Json => {
            write_json(rows, &mut buf)?;
            buf.push(b'\n');
        }
    }
    Ok(buf)
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    match TableFormat::from_path(path) {
        TableFormat::Csv => read_csv(f),
        TableFormat::Json => read_json(f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perf::{MetricsRecord, RawCounters, METRICS_COLUMNS};

    fn sample() -> Vec<MetricsRecord> {
        let c = RawCounters {
            l2_demand_misses: 311,
            l3_demand_misses: 17,
            prefetch_l2_misses: 4_001,
            l2_stall_cycles: 9_999,
            instructions: 123_456_789,
            total_cycles: 99_999_999,
        };
        vec![
            MetricsRecord::new("fd9", Some(10), 9_216, 1, c, 1.0 / 3.0).unwrap(),
            MetricsRecord::new("file", None, 7, 16, c.scaled(3), 2.5e-7).unwrap(),
        ]
    }

    #[test]
    fn csv_header_and_bitwise_roundtrip() {
        let rows = sample();
        let bytes = to_bytes(&rows, TableFormat::Csv).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), METRICS_COLUMNS.join(","));
        let back: Vec<MetricsRecord> = read_csv(&bytes[..]).unwrap();
        assert_eq!(back, rows);
        assert!(back.iter().all(MetricsRecord::is_consistent));
        assert_eq!(back[1].scale, None);
    }

    #[test]
    fn json_roundtrip() {
        let rows = sample();
        let bytes = to_bytes(&rows, TableFormat::Json).unwrap();
        let back: Vec<MetricsRecord> = read_json(&bytes[..]).unwrap();
        assert_eq!(back, rows);
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        let keys: Vec<&String> = v[0].as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), METRICS_COLUMNS.len());
    }

    #[test]
    fn malformed_csv_is_format_error() {
        let bad = b"kind,scale\nfd9,notanumber\n";
        assert!(matches!(
            read_csv::<MetricsRecord, _>(&bad[..]),
            Err(Error::Format(_))
        ));
    }
}
