use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{EmbeddingStream, SegmentEmbedding};
use crate::scalar::Real;

/// Read the plain-text embeddings table: a `#dim D` header line, then one
/// `start end v1 .. vD` row per segment. The session id is the file stem.
pub fn load_embeddings<F: Real>(path: impl AsRef<Path>) -> Result<EmbeddingStream<F>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file, expected '#dim D' header"))?;
    let dim: usize = header
        .strip_prefix("#dim")
        .map(str::trim)
        .and_then(|d| d.parse().ok())
        .filter(|&d: &usize| d > 0)
        .ok_or_else(|| Error::parse(path, 1, format!("expected '#dim D' header, got '{header}'")))?;

    let mut segments: Vec<SegmentEmbedding<F>> = Vec::new();
    let mut prev_start = f64::NEG_INFINITY;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != dim + 2 {
            return Err(Error::parse(
                path,
                lineno,
                format!(
                    "expected start, end and {dim} values, got {} fields",
                    fields.len()
                ),
            ));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::parse(path, lineno, format!("non-numeric field '{s}'")))
        };
        let start = num(fields[0])?;
        let end = num(fields[1])?;
        if !(end > start) {
            return Err(Error::parse(
                path,
                lineno,
                format!("segment end {end} not after start {start}"),
            ));
        }
        if start < prev_start {
            return Err(Error::parse(
                path,
                lineno,
                "segment starts are not sorted".to_string(),
            ));
        }
        prev_start = start;
        let mut vector = Vec::with_capacity(dim);
        for f in &fields[2..] {
            let v = num(f)?;
            if !v.is_finite() {
                return Err(Error::parse(path, lineno, format!("non-finite value '{f}'")));
            }
            vector.push(F::of(v));
        }
        segments.push(SegmentEmbedding { start, end, vector });
    }

    let session_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("session")
        .to_string();
    EmbeddingStream::new(session_id, dim, segments)
}

/// Write the embeddings table. Floats use shortest round-trip formatting so
/// `load(write(x)) == x` for the stream's scalar type.
pub fn write_embeddings<F: Real>(stream: &EmbeddingStream<F>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let _ = writeln!(out, "#dim {}", stream.dim);
    for seg in &stream.segments {
        let _ = write!(out, "{} {}", seg.start, seg.end);
        for v in &seg.vector {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_file(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn well_formed_file_loads() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            &dir,
            "sess.emb",
            "#dim 4\n0.0 1.5 1 2 3 4\n0.5 2.0 5 6 7 8\n1.0 2.5 -1 -2 -3 -4\n",
        );
        let s: EmbeddingStream<f64> = load_embeddings(&p).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.dim, 4);
        assert_eq!(s.session_id, "sess");
        assert_eq!(s.segments[1].vector, vec![5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn dimension_mismatch_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "x.emb", "#dim 4\n0 1.5 1 2 3 4\n0.5 2.0 1 2 3\n");
        let err = load_embeddings::<f64>(&p).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_field_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "x.emb", "#dim 2\n0 1.5 1 2\n1 2.5 oops 2\n");
        let err = load_embeddings::<f64>(&p).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("oops"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unsorted_timestamps_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "x.emb", "#dim 1\n1.0 2.0 3\n0.0 1.0 4\n");
        let err = load_embeddings::<f64>(&p).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn write_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let segs = vec![
            SegmentEmbedding {
                start: 0.0,
                end: 1.5,
                vector: vec![0.1, -2.75, 3.0000001],
            },
            SegmentEmbedding {
                start: 0.5,
                end: 2.0,
                vector: vec![1e-17, 42.0, -0.333333333333333],
            },
        ];
        let stream = EmbeddingStream::new("roundtrip", 3, segs).unwrap();
        let p = dir.path().join("roundtrip.emb");
        write_embeddings(&stream, &p).unwrap();
        let back: EmbeddingStream<f64> = load_embeddings(&p).unwrap();
        assert_eq!(stream, back);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_embeddings::<f64>("/nonexistent/path.emb").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
