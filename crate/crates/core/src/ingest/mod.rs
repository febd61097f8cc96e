//! File ingestion and uniform segmentation: embeddings tables, oracle-SAD
//! region lists, and RTTM speaker annotations.

mod embeddings;
mod rttm;
mod sad;

pub use embeddings::{load_embeddings, write_embeddings};
pub use rttm::{load_rttm, write_rttm};
pub use sad::{load_sad, write_sad};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One time-stamped fixed-dimension segment embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentEmbedding<F> {
    pub start: f64,
    pub end: f64,
    pub vector: Vec<F>,
}

impl<F: Real> SegmentEmbedding<F> {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }
}

/// Ordered segment embeddings for one session.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStream<F> {
    pub session_id: String,
    pub dim: usize,
    pub segments: Vec<SegmentEmbedding<F>>,
}

impl<F: Real> EmbeddingStream<F> {
    pub fn new(
        session_id: impl Into<String>,
        dim: usize,
        segments: Vec<SegmentEmbedding<F>>,
    ) -> Result<Self> {
        let stream = EmbeddingStream {
            session_id: session_id.into(),
            dim,
            segments,
        };
        stream.validate()?;
        Ok(stream)
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Segment (start, end) pairs in stream order.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.segments.iter().map(|s| (s.start, s.end)).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Invalid("embedding stream is empty".into()));
        }
        if self.dim == 0 {
            return Err(Error::Invalid("embedding dimension must be positive".into()));
        }
        let mut prev_start = f64::NEG_INFINITY;
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.vector.len() != self.dim {
                return Err(Error::Invalid(format!(
                    "segment {i}: dimension {} != stream dimension {}",
                    seg.vector.len(),
                    self.dim
                )));
            }
            if !(seg.end > seg.start) {
                return Err(Error::Invalid(format!(
                    "segment {i}: end {} not after start {}",
                    seg.end, seg.start
                )));
            }
            if seg.start < prev_start {
                return Err(Error::Invalid(format!(
                    "segment {i}: starts before its predecessor"
                )));
            }
            if seg.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("segment {i}: non-finite value")));
            }
            prev_start = seg.start;
        }
        Ok(())
    }
}

/// One oracle speech region, in seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeechRegion {
    pub start: f64,
    pub end: f64,
}

impl SpeechRegion {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Validate that regions are individually well-formed, sorted, and disjoint.
pub fn validate_regions(regions: &[SpeechRegion]) -> Result<()> {
    let mut prev_end = f64::NEG_INFINITY;
    for (i, r) in regions.iter().enumerate() {
        if !(r.end > r.start) {
            return Err(Error::Invalid(format!(
                "region {i}: end {} not after start {}",
                r.end, r.start
            )));
        }
        if r.start < prev_end {
            return Err(Error::Invalid(format!(
                "region {i}: overlaps or precedes region {}",
                i - 1
            )));
        }
        prev_end = r.end;
    }
    Ok(())
}

/// One speaker turn as carried by RTTM.
#[derive(Clone, Debug, PartialEq)]
pub struct Turn {
    pub start: f64,
    pub duration: f64,
    pub speaker: String,
}

impl Turn {
    pub fn new(start: f64, duration: f64, speaker: impl Into<String>) -> Self {
        Turn {
            start,
            duration,
            speaker: speaker.into(),
        }
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

// Tolerance for "window fits in region" decisions, absorbing float noise in
// start + i*hop accumulation.
const SEG_EPS: f64 = 1e-9;

/// Cut each speech region into fixed windows of length `win` advanced by
/// `hop`. Windows never span region boundaries; a region shorter than `win`
/// yields one window covering the whole region; trailing audio that no full
/// window reaches is truncated.
pub fn uniform_segments(
    regions: &[SpeechRegion],
    win: f64,
    hop: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(win > 0.0) {
        return Err(Error::Config(format!("window must be positive, got {win}")));
    }
    if !(hop > 0.0 && hop <= win) {
        return Err(Error::Config(format!(
            "hop must satisfy 0 < hop <= win, got hop={hop} win={win}"
        )));
    }
    validate_regions(regions)?;
    let mut out = Vec::new();
    for r in regions {
        if r.duration() < win - SEG_EPS {
            out.push((r.start, r.end));
            continue;
        }
        let mut i = 0usize;
        loop {
            let start = r.start + i as f64 * hop;
            let end = start + win;
            if end > r.end + SEG_EPS {
                break;
            }
            out.push((start, end.min(r.end)));
            i += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn region(start: f64, end: f64) -> SpeechRegion {
        SpeechRegion { start, end }
    }

    fn assert_windows(actual: &[(f64, f64)], expected: &[(f64, f64)]) {
        assert_eq!(actual.len(), expected.len(), "{actual:?} vs {expected:?}");
        for ((a0, a1), (e0, e1)) in actual.iter().zip(expected) {
            assert_abs_diff_eq!(a0, e0, epsilon = 1e-9);
            assert_abs_diff_eq!(a1, e1, epsilon = 1e-9);
        }
    }

    #[test]
    fn three_second_region_gives_four_windows() {
        let w = uniform_segments(&[region(0.0, 3.0)], 1.5, 0.5).unwrap();
        assert_windows(&w, &[(0.0, 1.5), (0.5, 2.0), (1.0, 2.5), (1.5, 3.0)]);
    }

    #[test]
    fn short_region_yields_single_full_cover() {
        let w = uniform_segments(&[region(0.0, 1.0)], 1.5, 0.5).unwrap();
        assert_windows(&w, &[(0.0, 1.0)]);
    }

    #[test]
    fn windows_never_cross_region_boundaries() {
        let w = uniform_segments(&[region(0.0, 2.0), region(5.0, 6.5)], 1.5, 0.5).unwrap();
        assert_windows(&w, &[(0.0, 1.5), (0.5, 2.0), (5.0, 6.5)]);
    }

    #[test]
    fn empty_regions_give_empty_output() {
        assert!(uniform_segments(&[], 1.5, 0.5).unwrap().is_empty());
    }

    #[test]
    fn exact_fit_region_is_one_window() {
        let w = uniform_segments(&[region(2.0, 3.5)], 1.5, 0.5).unwrap();
        assert_windows(&w, &[(2.0, 3.5)]);
    }

    #[test]
    fn window_lengths_and_overlap_invariants() {
        let regions = [region(0.3, 7.21), region(9.0, 9.4), region(10.0, 14.05)];
        let (win, hop) = (1.5, 0.5);
        let w = uniform_segments(&regions, win, hop).unwrap();
        let mut short_per_region = std::collections::HashMap::new();
        for &(s, e) in &w {
            let len = e - s;
            if (len - win).abs() > 1e-9 {
                let owner = regions
                    .iter()
                    .position(|r| s >= r.start - 1e-9 && e <= r.end + 1e-9)
                    .unwrap();
                *short_per_region.entry(owner).or_insert(0) += 1;
            }
        }
        assert!(short_per_region.values().all(|&c| c <= 1));
        for pair in w.windows(2) {
            let (_, e0) = pair[0];
            let (s1, _) = pair[1];
            // Consecutive windows inside one region overlap by win - hop.
            if s1 < e0 {
                assert_abs_diff_eq!(e0 - s1, win - hop, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn invalid_hop_or_regions_rejected() {
        assert!(uniform_segments(&[region(0.0, 1.0)], 1.5, 0.0).is_err());
        assert!(uniform_segments(&[region(0.0, 1.0)], 1.5, 2.0).is_err());
        assert!(uniform_segments(&[region(1.0, 0.5)], 1.5, 0.5).is_err());
        assert!(uniform_segments(&[region(0.0, 2.0), region(1.0, 3.0)], 1.5, 0.5).is_err());
    }

    #[test]
    fn stream_invariants_enforced() {
        let seg = |start: f64, v: Vec<f64>| SegmentEmbedding {
            start,
            end: start + 1.0,
            vector: v,
        };
        assert!(EmbeddingStream::<f64>::new("s", 2, vec![]).is_err());
        assert!(
            EmbeddingStream::new("s", 2, vec![seg(0.0, vec![1.0, 2.0]), seg(0.5, vec![3.0])])
                .is_err()
        );
        assert!(EmbeddingStream::new(
            "s",
            2,
            vec![seg(1.0, vec![1.0, 2.0]), seg(0.0, vec![1.0, 2.0])]
        )
        .is_err());
        assert!(EmbeddingStream::new("s", 2, vec![seg(0.0, vec![f64::INFINITY, 0.0])]).is_err());
        assert!(EmbeddingStream::new("s", 2, vec![seg(0.0, vec![1.0, 2.0])]).is_ok());
    }
}
