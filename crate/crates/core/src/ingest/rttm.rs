use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::Turn;

/// Parse SPEAKER lines from an RTTM file; all other record types are
/// skipped. Field layout per line:
/// `SPEAKER <session> <chan> <onset> <dur> <NA> <NA> <speaker> <NA> <NA>`.
pub fn load_rttm(path: impl AsRef<Path>) -> Result<Vec<Turn>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut turns = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.first() != Some(&"SPEAKER") {
            continue;
        }
        if fields.len() < 8 {
            return Err(Error::parse(
                path,
                lineno,
                format!("SPEAKER line has {} fields, expected at least 8", fields.len()),
            ));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::parse(path, lineno, format!("bad number '{s}'")))
        };
        let start = num(fields[3])?;
        let duration = num(fields[4])?;
        if !(duration > 0.0) {
            return Err(Error::parse(
                path,
                lineno,
                format!("turn duration must be positive, got {duration}"),
            ));
        }
        turns.push(Turn::new(start, duration, fields[7]));
    }
    Ok(turns)
}

/// Write turns as SPEAKER lines with times at 3 decimals.
pub fn write_rttm(turns: &[Turn], session_id: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for t in turns {
        let _ = writeln!(
            out,
            "SPEAKER {session_id} 1 {:.3} {:.3} <NA> <NA> {} <NA> <NA>",
            t.start, t.duration, t.speaker
        );
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
