//! Versioned CSV emission: a `schema=1` line, a header row, and data rows
//! with floats printed to 17 significant digits for bit-exact reproduction.

use crate::error::{Error, Result};
use std::io::Write;

pub const SCHEMA_LINE: &str = "schema=1";

/// 17-significant-digit float formatting (round-trips f64 exactly).
pub fn fmt_f(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{v:.16e}")
}

/// An in-memory CSV document under the fixed schema.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvDoc {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvDoc {
    pub fn new(header: &[&str]) -> Self {
        CsvDoc {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{SCHEMA_LINE}")?;
        writeln!(out, "{}", self.header.join(","))?;
        for row in &self.rows {
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write succeeds");
        buf
    }

    /// Column index by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Parses a schema-1 CSV and rejects mixed configuration hashes: rows from
/// different configurations must never be aggregated.
pub fn read_validated(text: &str) -> Result<CsvDoc> {
    let mut lines = text.lines();
    match lines.next() {
        Some(SCHEMA_LINE) => {}
        other => {
            return Err(Error::InvalidArgument(format!(
                "expected `{SCHEMA_LINE}` as the first line, found {other:?}"
            )))
        }
    }
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("missing header row".into()))?
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let hash_col = header.iter().position(|h| h == "config_hash");
    let mut rows = Vec::new();
    let mut seen_hash: Option<String> = None;
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
        if row.len() != header.len() {
            return Err(Error::InvalidArgument(format!(
                "row {} has {} fields, header has {}",
                i + 3,
                row.len(),
                header.len()
            )));
        }
        if let Some(col) = hash_col {
            match &seen_hash {
                None => seen_hash = Some(row[col].clone()),
                Some(h) if *h != row[col] => return Err(Error::InvalidArgument(
                    "mixed config hashes: refusing to aggregate rows from different configurations"
                        .into(),
                )),
                _ => {}
            }
        }
        rows.push(row);
    }
    Ok(CsvDoc { header, rows })
}
