//! Report writers: a JSON document or a flat CSV table.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::Format;

/// Serializes `doc` as pretty JSON, or `rows` as CSV with a header.
pub fn write_report<D: Serialize, R: Serialize>(
    doc: &D,
    rows: &[R],
    format: Format,
    out: Option<&Path>,
) -> std::io::Result<()> {
    let mut bytes = Vec::new();
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut bytes, doc)?;
            bytes.push(b'\n');
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut bytes);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    match out {
        Some(path) => std::fs::write(path, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bytes)?;
            stdout.flush()
        }
    }
}
