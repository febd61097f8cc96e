use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{validate_regions, SpeechRegion};

/// Read a speech-activity file: one `start end` pair per line, seconds.
/// Blank lines and `#` comments are ignored; regions must come sorted and
/// disjoint.
pub fn load_sad(path: impl AsRef<Path>) -> Result<Vec<SpeechRegion>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut regions = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 'start end', got {} fields", fields.len()),
            ));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::parse(path, lineno, format!("bad number '{s}'")))
        };
        regions.push(SpeechRegion {
            start: num(fields[0])?,
            end: num(fields[1])?,
        });
    }
    validate_regions(&regions)?;
    Ok(regions)
}

pub fn write_sad(regions: &[SpeechRegion], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for r in regions {
        let _ = writeln!(out, "{} {}", r.start, r.end);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
