//! Desk-scale synthetic sessions: Markov-chain speaker turns with
//! exponential durations, plus per-segment embeddings drawn from separated
//! per-speaker Gaussians. Stands in for real audio and a real embedding
//! extractor when exercising the pipeline end to end.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{Error, Result};
use crate::ingest::{uniform_segments, EmbeddingStream, SegmentEmbedding, SpeechRegion, Turn};
use crate::scalar::Real;

pub const SYNTH_WINDOW: f64 = 1.5;
pub const SYNTH_HOP: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct SynthSpec {
    pub n_speakers: usize,
    pub session_span: f64,
    pub embedding_dim: usize,
    /// Distance between speaker means in units of the within-speaker
    /// standard deviation.
    pub speaker_separation: f64,
    pub mean_turn: f64,
    /// Target stationary speech share for speaker 0; needs at least 3
    /// speakers to have any effect on the no-self-transition chain.
    pub minority_fraction: Option<f64>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_speakers: 2,
            session_span: 180.0,
            embedding_dim: 16,
            speaker_separation: 6.0,
            mean_turn: 5.0,
            minority_fraction: None,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.n_speakers < 2 {
            return Err(Error::Config("need at least 2 speakers".into()));
        }
        if self.n_speakers > self.embedding_dim {
            return Err(Error::Config(format!(
                "axis mean placement needs embedding_dim >= n_speakers ({} < {})",
                self.embedding_dim, self.n_speakers
            )));
        }
        if !(self.session_span > 0.0) || !(self.mean_turn > 0.0) {
            return Err(Error::Config("span and mean turn must be positive".into()));
        }
        if !(self.speaker_separation > 0.0) {
            return Err(Error::Config("separation must be positive".into()));
        }
        if let Some(f) = self.minority_fraction {
            if !(0.0 < f && f < 0.5) {
                return Err(Error::Config(format!(
                    "minority fraction must lie in (0, 0.5), got {f}"
                )));
            }
            if self.n_speakers < 3 {
                return Err(Error::Config(
                    "minority reweighting needs at least 3 speakers; with 2 the \
                     no-self-transition chain alternates regardless"
                        .into(),
                ));
            }
        }
        Ok(())
    }
}

/// One generated session with its ground truth.
#[derive(Clone, Debug)]
pub struct SynthSession<F> {
    pub stream: EmbeddingStream<F>,
    pub reference: Vec<Turn>,
    pub sad: Vec<SpeechRegion>,
    /// Dominant speaker of each segment, aligned with `stream.segments`.
    pub segment_speakers: Vec<usize>,
}

/// Generate a session: speaker turns tile the span back to back, SAD is
/// their union, and each uniform segment's embedding is drawn from the
/// isotropic unit Gaussian at its dominant speaker's mean. Deterministic
/// for a given seed.
pub fn generate_session<F: Real>(spec: &SynthSpec) -> Result<SynthSession<F>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_speakers;

    // Speaker selection weights. The vertex-weighted walk without
    // self-transitions gives speaker 0 a stationary share of
    // w / (2w + n - 2); aiming that at f/2 keeps realized shares below the
    // f ceiling despite per-session fluctuation.
    let mut weights = vec![1.0; n];
    if let Some(f) = spec.minority_fraction {
        weights[0] = f * (n as f64 - 2.0) / (2.0 * (1.0 - f));
    }

    let span_ms = (spec.session_span * 1000.0).round() as i64;
    let exp = Exp::new(1.0 / spec.mean_turn).expect("positive rate");
    let mut turns_ms: Vec<(i64, i64, usize)> = Vec::new();
    let mut t = 0i64;
    let mut current: Option<usize> = None;
    while t < span_ms {
        let speaker = weighted_pick(&weights, current, &mut rng);
        let dur_ms = ((exp.sample(&mut rng) * 1000.0).round() as i64).max(1);
        let end = (t + dur_ms).min(span_ms);
        turns_ms.push((t, end, speaker));
        t = end;
        current = Some(speaker);
    }

    let reference: Vec<Turn> = turns_ms
        .iter()
        .map(|&(s, e, spk)| Turn::new(s as f64 / 1000.0, (e - s) as f64 / 1000.0, format!("S{spk}")))
        .collect();
    let sad = vec![SpeechRegion {
        start: 0.0,
        end: span_ms as f64 / 1000.0,
    }];

    let intervals = uniform_segments(&sad, SYNTH_WINDOW, SYNTH_HOP)?;
    let mut segment_speakers = Vec::with_capacity(intervals.len());
    let mut segments = Vec::with_capacity(intervals.len());
    for &(s, e) in &intervals {
        let speaker = dominant_speaker(&turns_ms, (s * 1000.0).round() as i64, (e * 1000.0).round() as i64);
        segment_speakers.push(speaker);
        let mean_axis = speaker; // speaker means live on scaled unit axes
        let vector: Vec<F> = (0..spec.embedding_dim)
            .map(|d| {
                let noise: f64 = StandardNormal.sample(&mut rng);
                let mean = if d == mean_axis { spec.speaker_separation } else { 0.0 };
                F::of(mean + noise)
            })
            .collect();
        segments.push(SegmentEmbedding {
            start: s,
            end: e,
            vector,
        });
    }

    let stream = EmbeddingStream::new(
        format!("synth-{}", spec.seed),
        spec.embedding_dim,
        segments,
    )?;
    Ok(SynthSession {
        stream,
        reference,
        sad,
        segment_speakers,
    })
}

fn weighted_pick(weights: &[f64], exclude: Option<usize>, rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(_, &w)| w)
        .sum();
    let mut target = rng.gen_range(0.0..total);
    for (i, &w) in weights.iter().enumerate() {
        if Some(i) == exclude {
            continue;
        }
        if target < w {
            return i;
        }
        target -= w;
    }
    // Float underflow fallback: last eligible speaker.
    weights
        .iter()
        .enumerate()
        .rev()
        .find(|(i, _)| Some(*i) != exclude)
        .map(|(i, _)| i)
        .expect("at least two speakers")
}

/// Speaker owning the largest share of [start, end), ties toward the lower
/// speaker index.
fn dominant_speaker(turns_ms: &[(i64, i64, usize)], start: i64, end: i64) -> usize {
    let n = turns_ms.iter().map(|&(_, _, s)| s + 1).max().unwrap_or(1);
    let mut share = vec![0i64; n];
    for &(s, e, spk) in turns_ms {
        let overlap = e.min(end) - s.max(start);
        if overlap > 0 {
            share[spk] += overlap;
        }
    }
    let mut best = 0;
    for (i, &v) in share.iter().enumerate().skip(1) {
        if v > share[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmeans::kmeans;
    use crate::numeric::Mat;

    #[test]
    fn same_seed_gives_bit_identical_sessions() {
        let spec = SynthSpec {
            n_speakers: 3,
            session_span: 60.0,
            seed: 42,
            ..SynthSpec::default()
        };
        let a: SynthSession<f64> = generate_session(&spec).unwrap();
        let b: SynthSession<f64> = generate_session(&spec).unwrap();
        assert_eq!(a.stream, b.stream);
        assert_eq!(a.reference, b.reference);
        assert_eq!(a.sad, b.sad);
    }

    #[test]
    fn sad_duration_equals_total_turn_duration() {
        let spec = SynthSpec {
            n_speakers: 2,
            session_span: 90.0,
            seed: 7,
            ..SynthSpec::default()
        };
        let s: SynthSession<f64> = generate_session(&spec).unwrap();
        let turn_total: f64 = s.reference.iter().map(|t| t.duration).sum();
        let sad_total: f64 = s.sad.iter().map(|r| r.duration()).sum();
        assert!((turn_total - sad_total).abs() < 1e-9);
    }

    #[test]
    fn turns_are_sorted_disjoint_and_alternating() {
        let spec = SynthSpec {
            n_speakers: 2,
            session_span: 120.0,
            seed: 3,
            ..SynthSpec::default()
        };
        let s: SynthSession<f64> = generate_session(&spec).unwrap();
        for pair in s.reference.windows(2) {
            assert!(pair[0].end() <= pair[1].start + 1e-9);
            assert_ne!(pair[0].speaker, pair[1].speaker, "no self-transitions");
        }
    }

    #[test]
    fn segment_speakers_match_majority_overlap_with_turns() {
        let spec = SynthSpec {
            n_speakers: 3,
            session_span: 45.0,
            seed: 2,
            ..SynthSpec::default()
        };
        let s: SynthSession<f64> = generate_session(&spec).unwrap();
        for (seg, &label) in s.stream.segments.iter().zip(&s.segment_speakers) {
            // Recompute the majority owner from the reference turns.
            let mut share = std::collections::BTreeMap::new();
            for t in &s.reference {
                let overlap = t.end().min(seg.end) - t.start.max(seg.start);
                if overlap > 0.0 {
                    *share.entry(t.speaker.clone()).or_insert(0.0) += overlap;
                }
            }
            let (best, best_share) = share
                .iter()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(k, v)| (k.clone(), *v))
                .unwrap();
            let labeled_share = share.get(&format!("S{label}")).copied().unwrap_or(0.0);
            // Ties can legitimately go either way; otherwise they must agree.
            if (labeled_share - best_share).abs() > 1e-9 {
                panic!("segment labeled S{label} but majority owner is {best}");
            }
        }
    }

    #[test]
    fn kmeans_on_raw_embeddings_is_near_perfect_at_separation_six() {
        let spec = SynthSpec {
            n_speakers: 2,
            session_span: 120.0,
            speaker_separation: 6.0,
            seed: 11,
            ..SynthSpec::default()
        };
        let s: SynthSession<f64> = generate_session(&spec).unwrap();
        let rows: Vec<Vec<f64>> = s.stream.segments.iter().map(|g| g.vector.clone()).collect();
        let data = Mat::from_rows(&rows).unwrap();
        let result = kmeans(&data, 2, 5, 10).unwrap();
        let n = s.segment_speakers.len();
        let agree = result
            .labels
            .iter()
            .zip(&s.segment_speakers)
            .filter(|(a, b)| *a == *b)
            .count();
        let acc = agree.max(n - agree) as f64 / n as f64;
        assert!(acc >= 0.99, "kmeans accuracy {acc} below 0.99");
    }

    #[test]
    fn minority_fraction_produces_a_quiet_speaker() {
        // Per-session shares fluctuate (a 300s session sees only a couple of
        // minority turns), so check the panel: most seeds stay under the
        // ceiling and the average sits well below it.
        let mut shares = Vec::new();
        for seed in 0..10u64 {
            let spec = SynthSpec {
                n_speakers: 4,
                session_span: 300.0,
                minority_fraction: Some(0.05),
                seed,
                ..SynthSpec::default()
            };
            let s: SynthSession<f64> = generate_session(&spec).unwrap();
            let mut per_speaker = std::collections::BTreeMap::new();
            for t in &s.reference {
                *per_speaker.entry(t.speaker.clone()).or_insert(0.0) += t.duration;
            }
            let total: f64 = per_speaker.values().sum();
            shares.push(per_speaker.get("S0").copied().unwrap_or(0.0) / total);
        }
        let below = shares.iter().filter(|&&s| s < 0.05).count();
        let mean = shares.iter().sum::<f64>() / shares.len() as f64;
        assert!(below >= 8, "only {below}/10 seeds under the ceiling: {shares:?}");
        assert!(mean < 0.05, "mean share {mean} at or above the ceiling");
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = SynthSpec::default();
        spec.n_speakers = 1;
        assert!(generate_session::<f64>(&spec).is_err());
        let mut spec = SynthSpec::default();
        spec.n_speakers = 20;
        spec.embedding_dim = 4;
        assert!(generate_session::<f64>(&spec).is_err());
        let mut spec = SynthSpec::default();
        spec.minority_fraction = Some(0.1);
        assert!(generate_session::<f64>(&spec).is_err(), "minority with n=2");
    }
}
