//! NIST-style diarization error rate with optimal speaker mapping, plus the
//! minority-speaker error metric and batch aggregation.
//!
//! All durations are accumulated as exact integer milliseconds; seconds
//! appear only at the API boundary.

mod assignment;

pub use assignment::{brute_force_max, hungarian_max};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::ingest::Turn;

/// DER components in seconds plus the optimal hypothesis-to-reference
/// speaker mapping that produced them.
#[derive(Clone, Debug)]
pub struct DerReport {
    pub miss: f64,
    pub false_alarm: f64,
    pub confusion: f64,
    pub total_ref_speech: f64,
    pub der: f64,
    pub mapping: BTreeMap<String, String>,
    pub collar: f64,
    pub score_overlap: bool,
}

impl DerReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "DER {:.2}% (miss {:.3}s, false alarm {:.3}s, confusion {:.3}s over {:.3}s scored speech)",
            self.der * 100.0,
            self.miss,
            self.false_alarm,
            self.confusion,
            self.total_ref_speech
        );
        let _ = writeln!(
            s,
            "settings: collar {:.3}s, overlap {}",
            self.collar,
            if self.score_overlap { "scored" } else { "excluded" }
        );
        for (hyp, r) in &self.mapping {
            let _ = writeln!(s, "map: {hyp} -> {r}");
        }
        s
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "der = {:.6}", self.der);
        let _ = writeln!(s, "miss_seconds = {:.3}", self.miss);
        let _ = writeln!(s, "false_alarm_seconds = {:.3}", self.false_alarm);
        let _ = writeln!(s, "confusion_seconds = {:.3}", self.confusion);
        let _ = writeln!(s, "scored_speech_seconds = {:.3}", self.total_ref_speech);
        let _ = writeln!(s, "collar = {}", self.collar);
        let _ = writeln!(s, "score_overlap = {}", self.score_overlap);
        for (hyp, r) in &self.mapping {
            let _ = writeln!(s, "map.{hyp} = {r}");
        }
        s
    }
}

#[derive(Clone, Copy, Debug)]
struct MsTurn {
    start: i64,
    end: i64,
    speaker: usize,
}

/// An atomic scored stretch with the distinct speakers active on each side.
#[derive(Clone, Debug)]
struct ScoredInterval {
    dur: i64,
    refs: Vec<usize>,
    hyps: Vec<usize>,
}

fn to_ms(seconds: f64) -> i64 {
    (seconds * 1000.0).round() as i64
}

fn intern_turns(turns: &[Turn]) -> Result<(Vec<MsTurn>, Vec<String>)> {
    let mut names: Vec<String> = turns.iter().map(|t| t.speaker.clone()).collect();
    names.sort();
    names.dedup();
    let index: BTreeMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut ms = Vec::with_capacity(turns.len());
    for t in turns {
        if !(t.duration > 0.0) {
            return Err(Error::Invalid(format!(
                "turn at {} has non-positive duration {}",
                t.start, t.duration
            )));
        }
        let start = to_ms(t.start);
        let end = to_ms(t.end());
        if end > start {
            ms.push(MsTurn {
                start,
                end,
                speaker: index[t.speaker.as_str()],
            });
        }
    }
    Ok((ms, names))
}

/// Merge the +-collar zones around every reference turn boundary.
fn merged_collar_zones(ref_turns: &[MsTurn], collar_ms: i64) -> Vec<(i64, i64)> {
    if collar_ms == 0 {
        return Vec::new();
    }
    let mut zones: Vec<(i64, i64)> = ref_turns
        .iter()
        .flat_map(|t| [t.start, t.end])
        .map(|b| (b - collar_ms, b + collar_ms))
        .collect();
    zones.sort();
    let mut merged: Vec<(i64, i64)> = Vec::new();
    for z in zones {
        match merged.last_mut() {
            Some(last) if z.0 <= last.1 => last.1 = last.1.max(z.1),
            _ => merged.push(z),
        }
    }
    merged
}

fn in_zone(zones: &[(i64, i64)], a: i64, b: i64) -> bool {
    // Intervals never straddle zone edges (edges are cut points), so
    // containment of the left endpoint range suffices.
    let idx = zones.partition_point(|&(s, _)| s <= a);
    idx > 0 && zones[idx - 1].1 >= b
}

fn scored_intervals(
    ref_turns: &[MsTurn],
    hyp_turns: &[MsTurn],
    collar_ms: i64,
    score_overlap: bool,
) -> Vec<ScoredInterval> {
    let zones = merged_collar_zones(ref_turns, collar_ms);
    let mut cuts: Vec<i64> = Vec::new();
    for t in ref_turns.iter().chain(hyp_turns) {
        cuts.push(t.start);
        cuts.push(t.end);
    }
    for &(s, e) in &zones {
        cuts.push(s);
        cuts.push(e);
    }
    cuts.sort_unstable();
    cuts.dedup();

    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a || in_zone(&zones, a, b) {
            continue;
        }
        let mut refs: Vec<usize> = ref_turns
            .iter()
            .filter(|t| t.start <= a && t.end >= b)
            .map(|t| t.speaker)
            .collect();
        refs.sort_unstable();
        refs.dedup();
        if !score_overlap && refs.len() > 1 {
            continue;
        }
        let mut hyps: Vec<usize> = hyp_turns
            .iter()
            .filter(|t| t.start <= a && t.end >= b)
            .map(|t| t.speaker)
            .collect();
        hyps.sort_unstable();
        hyps.dedup();
        if refs.is_empty() && hyps.is_empty() {
            continue;
        }
        out.push(ScoredInterval {
            dur: b - a,
            refs,
            hyps,
        });
    }
    out
}

/// Co-occurrence duration of every (reference, hypothesis) speaker pair
/// over the scored intervals.
fn overlap_matrix(intervals: &[ScoredInterval], n_ref: usize, n_hyp: usize) -> Vec<Vec<i64>> {
    let mut m = vec![vec![0i64; n_hyp]; n_ref];
    for iv in intervals {
        for &r in &iv.refs {
            for &h in &iv.hyps {
                m[r][h] += iv.dur;
            }
        }
    }
    m
}

/// NIST-style DER: cut the time axis at every turn and collar boundary,
/// exclude collar zones (and overlapped reference speech unless
/// `score_overlap`), map hypothesis speakers to reference speakers by
/// maximum-overlap Hungarian assignment, and accumulate miss, false alarm,
/// and confusion.
pub fn compute_der(
    reference: &[Turn],
    hypothesis: &[Turn],
    collar: f64,
    score_overlap: bool,
) -> Result<DerReport> {
    if collar < 0.0 {
        return Err(Error::Config(format!("collar must be >= 0, got {collar}")));
    }
    if reference.is_empty() {
        return Err(Error::Invalid("reference has no speech".into()));
    }
    let (ref_ms, ref_names) = intern_turns(reference)?;
    let (hyp_ms, hyp_names) = intern_turns(hypothesis)?;
    let intervals = scored_intervals(&ref_ms, &hyp_ms, to_ms(collar), score_overlap);

    let matrix = overlap_matrix(&intervals, ref_names.len(), hyp_names.len());
    let (ref_to_hyp, _) = hungarian_max(&matrix);

    let mut miss = 0i64;
    let mut fa = 0i64;
    let mut conf = 0i64;
    let mut scored_ref = 0i64;
    for iv in &intervals {
        let n_ref = iv.refs.len() as i64;
        let n_hyp = iv.hyps.len() as i64;
        scored_ref += iv.dur * n_ref;
        miss += iv.dur * (n_ref - n_hyp).max(0);
        fa += iv.dur * (n_hyp - n_ref).max(0);
        let correct = iv
            .refs
            .iter()
            .filter(|&&r| ref_to_hyp[r].is_some_and(|h| iv.hyps.contains(&h)))
            .count() as i64;
        conf += iv.dur * (n_ref.min(n_hyp) - correct);
    }
    if scored_ref == 0 {
        return Err(Error::Invalid(
            "no reference speech remains after collar/overlap exclusions".into(),
        ));
    }

    let mut mapping = BTreeMap::new();
    for (r, h) in ref_to_hyp.iter().enumerate() {
        if let Some(h) = h {
            mapping.insert(hyp_names[*h].clone(), ref_names[r].clone());
        }
    }
    let sec = |ms: i64| ms as f64 / 1000.0;
    Ok(DerReport {
        miss: sec(miss),
        false_alarm: sec(fa),
        confusion: sec(conf),
        total_ref_speech: sec(scored_ref),
        der: (miss + fa + conf) as f64 / scored_ref as f64,
        mapping,
        collar,
        score_overlap,
    })
}

/// Exhaustive-search speaker mapping (hypothesis label -> reference label)
/// maximizing correctly attributed time at collar 0 with overlap scored.
/// Exponential in the speaker count; intended as the oracle for the
/// Hungarian step on sessions with few speakers.
pub fn brute_force_mapping(
    reference: &[Turn],
    hypothesis: &[Turn],
) -> Result<BTreeMap<String, String>> {
    let (ref_ms, ref_names) = intern_turns(reference)?;
    let (hyp_ms, hyp_names) = intern_turns(hypothesis)?;
    if ref_names.len() > 8 || hyp_names.len() > 8 {
        return Err(Error::Invalid(
            "brute-force mapping is limited to 8 speakers per side".into(),
        ));
    }
    let intervals = scored_intervals(&ref_ms, &hyp_ms, 0, true);
    let matrix = overlap_matrix(&intervals, ref_names.len(), hyp_names.len());
    let (ref_to_hyp, _) = brute_force_max(&matrix);
    let mut mapping = BTreeMap::new();
    for (r, h) in ref_to_hyp.iter().enumerate() {
        if let Some(h) = h {
            mapping.insert(hyp_names[*h].clone(), ref_names[r].clone());
        }
    }
    Ok(mapping)
}

/// Confusion time within the speech of reference speakers holding less than
/// `threshold` of the session, under the session-wide optimal mapping,
/// normalized by the session duration. Scored at collar 0 with overlapped
/// reference speech excluded.
pub fn minority_speaker_error(
    reference: &[Turn],
    hypothesis: &[Turn],
    threshold: f64,
    session_span: f64,
) -> Result<f64> {
    if !(0.0 < threshold && threshold < 1.0) {
        return Err(Error::Config(format!(
            "threshold must lie in (0,1), got {threshold}"
        )));
    }
    if !(session_span > 0.0) {
        return Err(Error::Config("session span must be positive".into()));
    }
    let (ref_ms, ref_names) = intern_turns(reference)?;
    let (hyp_ms, hyp_names) = intern_turns(hypothesis)?;

    let mut totals = vec![0i64; ref_names.len()];
    for t in &ref_ms {
        totals[t.speaker] += t.end - t.start;
    }
    let span_ms = to_ms(session_span);
    let cutoff = threshold * span_ms as f64;
    let minority: Vec<bool> = totals.iter().map(|&t| (t as f64) < cutoff).collect();
    if !minority.iter().any(|&m| m) {
        return Ok(0.0);
    }

    let intervals = scored_intervals(&ref_ms, &hyp_ms, 0, false);
    let matrix = overlap_matrix(&intervals, ref_names.len(), hyp_names.len());
    let (ref_to_hyp, _) = hungarian_max(&matrix);

    let mut conf = 0i64;
    for iv in &intervals {
        // Overlap excluded, so at most one reference speaker per interval.
        let Some(&r) = iv.refs.first() else { continue };
        if !minority[r] || iv.hyps.is_empty() {
            continue;
        }
        let correct = ref_to_hyp[r].is_some_and(|h| iv.hyps.contains(&h));
        if !correct {
            conf += iv.dur;
        }
    }
    Ok(conf as f64 / span_ms as f64)
}

/// Per-session DER paired with the session identity and duration, the unit
/// of batch aggregation.
#[derive(Clone, Debug)]
pub struct SessionScore {
    pub session: String,
    pub span: f64,
    pub report: DerReport,
}

#[derive(Clone, Debug)]
pub struct BucketStats {
    pub label: String,
    pub sessions: usize,
    pub mean_der: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Aggregate {
    pub sessions: usize,
    pub mean_der: f64,
    pub std_der: f64,
    pub buckets: Vec<BucketStats>,
}

/// Duration buckets in minutes; together they partition every duration.
const BUCKETS: [(f64, f64, &str); 5] = [
    (0.0, 20.0, "<20 min"),
    (20.0, 30.0, "20-30 min"),
    (30.0, 40.0, "30-40 min"),
    (40.0, 50.0, "40-50 min"),
    (50.0, f64::INFINITY, ">=50 min"),
];

/// Mean and population standard deviation of DER over sessions, with a
/// per-duration-bucket breakdown.
pub fn aggregate_reports(scores: &[SessionScore]) -> Result<Aggregate> {
    if scores.is_empty() {
        return Err(Error::Invalid("no sessions to aggregate".into()));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().map(|s| s.report.der).sum::<f64>() / n;
    let var = scores
        .iter()
        .map(|s| (s.report.der - mean).powi(2))
        .sum::<f64>()
        / n;
    let mut buckets = Vec::new();
    for (lo, hi, label) in BUCKETS {
        let members: Vec<&SessionScore> = scores
            .iter()
            .filter(|s| {
                let minutes = s.span / 60.0;
                minutes >= lo && minutes < hi
            })
            .collect();
        let mean_der = if members.is_empty() {
            None
        } else {
            Some(members.iter().map(|s| s.report.der).sum::<f64>() / members.len() as f64)
        };
        buckets.push(BucketStats {
            label: label.to_string(),
            sessions: members.len(),
            mean_der,
        });
    }
    Ok(Aggregate {
        sessions: scores.len(),
        mean_der: mean,
        std_der: var.sqrt(),
        buckets,
    })
}
