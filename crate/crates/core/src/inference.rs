//! Segment decisions to frame labels, median smoothing, and turn emission.
//!
//! Frame bookkeeping happens on an integer millisecond grid (half-ms for
//! midpoints) so frame membership never depends on float rounding.

use crate::error::{Error, Result};
use crate::ingest::{validate_regions, SpeechRegion, Turn};
use crate::mixture::Partition;
use crate::scalar::Real;

pub const NON_SPEECH: i32 = -1;

/// Frame-level speaker labeling of one session; `NON_SPEECH` marks frames
/// outside the SAD regions.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameTimeline {
    pub frame_period: f64,
    pub labels: Vec<i32>,
    pub span: f64,
}

impl FrameTimeline {
    pub fn num_frames(&self) -> usize {
        self.labels.len()
    }

    pub fn time_of(&self, frame: usize) -> f64 {
        frame as f64 * self.frame_period
    }

    pub fn speech_frames(&self) -> usize {
        self.labels.iter().filter(|&&l| l != NON_SPEECH).count()
    }
}

fn period_ms(frame_period: f64) -> Result<i64> {
    let ms = (frame_period * 1000.0).round();
    if ms < 1.0 || (frame_period * 1000.0 - ms).abs() > 1e-6 {
        return Err(Error::Config(format!(
            "frame period must be a positive whole number of milliseconds, got {frame_period}"
        )));
    }
    Ok(ms as i64)
}

fn to_ms(seconds: f64) -> i64 {
    (seconds * 1000.0).round() as i64
}

/// Average the posteriors of all segments covering each speech frame's
/// midpoint and take the argmax (ties to the lower index). Speech frames no
/// segment covers take the label of the nearest segment midpoint;
/// non-speech frames are `NON_SPEECH`.
pub fn segments_to_frames<F: Real>(
    segments: &[(f64, f64)],
    partition: &Partition<F>,
    sad_regions: &[SpeechRegion],
    frame_period: f64,
) -> Result<FrameTimeline> {
    validate_regions(sad_regions)?;
    if segments.is_empty() && !sad_regions.is_empty() {
        return Err(Error::Invalid(
            "no segments to label speech frames from".into(),
        ));
    }
    if partition.n_segments() != segments.len() {
        return Err(Error::Invalid(format!(
            "partition covers {} segments but {} were given",
            partition.n_segments(),
            segments.len()
        )));
    }
    let p_ms = period_ms(frame_period)?;
    let span = sad_regions.last().map_or(0.0, |r| r.end);
    let span_ms = to_ms(span);
    let n_frames = (span_ms + p_ms - 1) / p_ms;
    let n_frames = n_frames.max(0) as usize;
    let n_clusters = partition.posteriors.cols();

    // Frame midpoint in half-milliseconds: 2*f*p + p.
    let mid2 = |f: usize| 2 * f as i64 * p_ms + p_ms;

    // Speech mask from the SAD regions.
    let mut labels = vec![NON_SPEECH; n_frames];
    let mut is_speech = vec![false; n_frames];
    for r in sad_regions {
        let (s2, e2) = (2 * to_ms(r.start), 2 * to_ms(r.end));
        let f_lo = (to_ms(r.start) / p_ms).max(0) as usize;
        for f in f_lo..n_frames {
            let m = mid2(f);
            if m >= e2 {
                break;
            }
            if m >= s2 {
                is_speech[f] = true;
            }
        }
    }

    // Posterior sums from covering segments.
    let mut sums = vec![F::zero(); n_frames * n_clusters];
    let mut covered = vec![false; n_frames];
    for (j, &(s, e)) in segments.iter().enumerate() {
        let (s2, e2) = (2 * to_ms(s), 2 * to_ms(e));
        let post = partition.posteriors.row(j);
        let f_lo = (to_ms(s) / p_ms).max(0) as usize;
        for f in f_lo..n_frames {
            let m = mid2(f);
            if m >= e2 {
                break;
            }
            if m >= s2 {
                covered[f] = true;
                let base = f * n_clusters;
                for (slot, &p) in sums[base..base + n_clusters].iter_mut().zip(post) {
                    *slot += p;
                }
            }
        }
    }

    // Segment midpoints in half-ms, for the uncovered-frame fallback.
    let seg_mid2: Vec<i64> = segments.iter().map(|&(s, e)| to_ms(s) + to_ms(e)).collect();
    for f in 0..n_frames {
        if !is_speech[f] {
            continue;
        }
        if covered[f] {
            let base = f * n_clusters;
            labels[f] = argmax_slice(&sums[base..base + n_clusters]) as i32;
        } else {
            let m = mid2(f);
            let mut best = 0usize;
            let mut best_d = (seg_mid2[0] - m).abs();
            for (j, &sm) in seg_mid2.iter().enumerate().skip(1) {
                let d = (sm - m).abs();
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            labels[f] = partition.assignment[best] as i32;
        }
    }

    Ok(FrameTimeline {
        frame_period,
        labels,
        span,
    })
}

fn argmax_slice<F: Real>(row: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Median-filter speech labels with a centered window of `kernel` frames.
/// Windows contain speech frames only and truncate at timeline and
/// SAD-region boundaries; the median of an even-sized window is the lower
/// middle element. Non-speech frames are never altered.
pub fn median_smooth(timeline: &FrameTimeline, kernel: usize) -> Result<FrameTimeline> {
    if kernel == 0 || kernel % 2 == 0 {
        return Err(Error::Config(format!(
            "median kernel must be odd and positive, got {kernel}"
        )));
    }
    let h = kernel / 2;
    let labels = &timeline.labels;
    let mut out = labels.clone();
    let n = labels.len();

    let mut run_start = None;
    for f in 0..=n {
        let speech = f < n && labels[f] != NON_SPEECH;
        match (run_start, speech) {
            (None, true) => run_start = Some(f),
            (Some(a), false) => {
                smooth_run(labels, &mut out, a, f - 1, h);
                run_start = None;
            }
            _ => {}
        }
    }
    Ok(FrameTimeline {
        frame_period: timeline.frame_period,
        labels: out,
        span: timeline.span,
    })
}

/// Sliding counting median over one contiguous speech run [a, b].
fn smooth_run(labels: &[i32], out: &mut [i32], a: usize, b: usize, h: usize) {
    let max_label = labels[a..=b].iter().copied().max().unwrap_or(0).max(0) as usize;
    let mut counts = vec![0usize; max_label + 1];
    let mut lo = a;
    let mut hi = a.min(b); // window currently [lo, hi]
    counts[labels[a] as usize] += 1;
    let target_hi = (a + h).min(b);
    while hi < target_hi {
        hi += 1;
        counts[labels[hi] as usize] += 1;
    }
    for f in a..=b {
        let want_lo = f.saturating_sub(h).max(a);
        let want_hi = (f + h).min(b);
        while lo < want_lo {
            counts[labels[lo] as usize] -= 1;
            lo += 1;
        }
        while hi < want_hi {
            hi += 1;
            counts[labels[hi] as usize] += 1;
        }
        let len = hi - lo + 1;
        // Lower middle element of the sorted window.
        let target = (len - 1) / 2;
        let mut seen = 0usize;
        for (label, &c) in counts.iter().enumerate() {
            seen += c;
            if seen > target {
                out[f] = label as i32;
                break;
            }
        }
    }
}

/// Run-length encode maximal stretches of identical speech labels into
/// turns named `spk<label>`.
pub fn frames_to_turns(timeline: &FrameTimeline) -> Vec<Turn> {
    let mut turns = Vec::new();
    let labels = &timeline.labels;
    let mut i = 0usize;
    while i < labels.len() {
        if labels[i] == NON_SPEECH {
            i += 1;
            continue;
        }
        let label = labels[i];
        let mut j = i + 1;
        while j < labels.len() && labels[j] == label {
            j += 1;
        }
        turns.push(Turn::new(
            timeline.time_of(i),
            (j - i) as f64 * timeline.frame_period,
            format!("spk{label}"),
        ));
        i = j;
    }
    turns
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Mat;
    use approx::assert_abs_diff_eq;

    fn partition_from(rows: Vec<Vec<f64>>) -> Partition<f64> {
        Partition::from_posteriors(Mat::from_rows(&rows).unwrap())
    }

    fn region(start: f64, end: f64) -> SpeechRegion {
        SpeechRegion { start, end }
    }

    fn timeline(labels: Vec<i32>, period: f64) -> FrameTimeline {
        let span = labels.len() as f64 * period;
        FrameTimeline {
            frame_period: period,
            labels,
            span,
        }
    }

    #[test]
    fn single_segment_labels_all_frames() {
        // One segment [0, 1.5] assigned to cluster 2.
        let partition = partition_from(vec![vec![0.1, 0.2, 0.7]]);
        let t = segments_to_frames(&[(0.0, 1.5)], &partition, &[region(0.0, 1.5)], 0.01).unwrap();
        assert_eq!(t.num_frames(), 150);
        assert!(t.labels.iter().all(|&l| l == 2));
    }

    #[test]
    fn overlapping_segments_average_posteriors() {
        // Posteriors (0.9, 0.1) and (0.2, 0.8): average (0.55, 0.45) -> 0.
        let partition = partition_from(vec![vec![0.9, 0.1], vec![0.2, 0.8]]);
        let t = segments_to_frames(
            &[(0.0, 1.5), (0.5, 2.0)],
            &partition,
            &[region(0.0, 2.0)],
            0.01,
        )
        .unwrap();
        // A frame inside the shared stretch [0.5, 1.5):
        assert_eq!(t.labels[100], 0);
        // Frames only the second segment covers:
        assert_eq!(t.labels[160], 1);
    }

    #[test]
    fn frames_outside_sad_are_non_speech() {
        let partition = partition_from(vec![vec![1.0]]);
        let t = segments_to_frames(&[(0.0, 1.0)], &partition, &[region(0.0, 1.0)], 0.01).unwrap();
        assert_eq!(t.num_frames(), 100);
        let t2 = segments_to_frames(
            &[(0.0, 1.0)],
            &partition,
            &[region(0.0, 1.0), region(2.0, 2.5)],
            0.01,
        )
        .unwrap();
        assert_eq!(t2.num_frames(), 250);
        assert_eq!(t2.labels[150], NON_SPEECH);
        assert_eq!(t2.labels[50], 0);
        // Uncovered speech frames fall back to the nearest segment midpoint.
        assert_eq!(t2.labels[220], 0);
    }

    #[test]
    fn empty_segments_with_speech_is_an_error() {
        let partition = partition_from(vec![vec![1.0]]);
        let empty: Vec<(f64, f64)> = vec![];
        let bad = segments_to_frames(&empty, &Partition::<f64> {
            assignment: vec![],
            posteriors: Mat::zeros(0, 1),
        }, &[region(0.0, 1.0)], 0.01);
        assert!(bad.is_err());
        let _ = partition;
    }

    #[test]
    fn constant_sequence_is_median_fixed_point() {
        let t = timeline(vec![1; 50], 0.01);
        for kernel in [1usize, 3, 361] {
            assert_eq!(median_smooth(&t, kernel).unwrap().labels, t.labels);
        }
    }

    #[test]
    fn kernel_three_removes_an_impulse() {
        let t = timeline(vec![1, 1, 1, 0, 1, 1, 1], 0.01);
        let sm = median_smooth(&t, 3).unwrap();
        assert_eq!(sm.labels, vec![1; 7]);
    }

    #[test]
    fn kernel_one_is_identity() {
        let t = timeline(vec![0, 1, 2, 1, 0, NON_SPEECH, 3, 3], 0.01);
        assert_eq!(median_smooth(&t, 1).unwrap().labels, t.labels);
    }

    #[test]
    fn even_kernel_rejected() {
        let t = timeline(vec![0, 1], 0.01);
        assert!(median_smooth(&t, 2).is_err());
        assert!(median_smooth(&t, 0).is_err());
    }

    #[test]
    fn smoothing_respects_region_boundaries() {
        // Two one-frame speech islands around silence; a kernel of 3 must
        // not bridge them.
        let t = timeline(vec![0, NON_SPEECH, 1, 1, NON_SPEECH, 0], 0.01);
        let sm = median_smooth(&t, 3).unwrap();
        assert_eq!(sm.labels, t.labels);
    }

    #[test]
    fn median_never_invents_labels_and_keeps_speech_mask() {
        let labels = vec![2, 2, 0, 2, 2, NON_SPEECH, 1, 1, 1, 0, 0, 0, 1];
        let t = timeline(labels.clone(), 0.01);
        let sm = median_smooth(&t, 5).unwrap();
        for (o, n) in labels.iter().zip(&sm.labels) {
            assert_eq!(*o == NON_SPEECH, *n == NON_SPEECH);
            if *n != NON_SPEECH {
                assert!(labels.contains(n));
            }
        }
    }

    #[test]
    fn median_idempotent_on_long_runs() {
        // All runs at least as long as the kernel.
        let mut labels = Vec::new();
        labels.extend(std::iter::repeat(0).take(7));
        labels.extend(std::iter::repeat(3).take(9));
        labels.extend(std::iter::repeat(1).take(7));
        let t = timeline(labels, 0.01);
        let once = median_smooth(&t, 7).unwrap();
        let twice = median_smooth(&once, 7).unwrap();
        assert_eq!(once.labels, t.labels);
        assert_eq!(twice.labels, once.labels);
    }

    #[test]
    fn frames_to_turns_run_length_encodes() {
        let mut labels = vec![0; 100];
        labels.extend(vec![1; 50]);
        let t = timeline(labels, 0.01);
        let turns = frames_to_turns(&t);
        assert_eq!(turns.len(), 2);
        assert_abs_diff_eq!(turns[0].start, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(turns[0].duration, 1.0, epsilon = 1e-9);
        assert_eq!(turns[0].speaker, "spk0");
        assert_abs_diff_eq!(turns[1].start, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(turns[1].duration, 0.5, epsilon = 1e-9);
        assert_eq!(turns[1].speaker, "spk1");
    }

    #[test]
    fn all_non_speech_gives_no_turns() {
        let t = timeline(vec![NON_SPEECH; 20], 0.01);
        assert!(frames_to_turns(&t).is_empty());
    }

    #[test]
    fn frames_turns_frames_roundtrip() {
        // Rebuild frame labels from the emitted turns; midpoint containment
        // must reproduce the original labels exactly.
        let labels = vec![
            NON_SPEECH, 0, 0, 1, 1, 1, NON_SPEECH, NON_SPEECH, 2, 2, 0, NON_SPEECH,
        ];
        let t = timeline(labels.clone(), 0.01);
        let turns = frames_to_turns(&t);
        let mut rebuilt = vec![NON_SPEECH; labels.len()];
        for turn in &turns {
            let label: i32 = turn.speaker.strip_prefix("spk").unwrap().parse().unwrap();
            for (f, slot) in rebuilt.iter_mut().enumerate() {
                let mid = (f as f64 + 0.5) * t.frame_period;
                if mid >= turn.start && mid < turn.end() {
                    *slot = label;
                }
            }
        }
        assert_eq!(rebuilt, labels);
    }
}
