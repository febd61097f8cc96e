//! End-to-end orchestration of the diarization variants:
//! P1 raw + random init, P2 raw + k-means init, P3 spectral + random init,
//! P4 spectral + k-means init.

use crate::error::{Error, Result};
use crate::inference::{frames_to_turns, median_smooth, segments_to_frames};
use crate::ingest::{EmbeddingStream, SpeechRegion, Turn};
use crate::kmeans::kmeans;
use crate::mixture::{fit, random_balanced_labels, FitHistory, GanmmConfig, Partition};
use crate::numeric::Mat;
use crate::scalar::Real;
use crate::spectral::{cosine_affinity, estimate_num_speakers, spectral_embed};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    P1,
    P2,
    P3,
    P4,
}

impl Variant {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p1" => Ok(Variant::P1),
            "p2" => Ok(Variant::P2),
            "p3" => Ok(Variant::P3),
            "p4" => Ok(Variant::P4),
            other => Err(Error::Config(format!(
                "unknown variant '{other}', expected one of p1, p2, p3, p4"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::P1 => "p1",
            Variant::P2 => "p2",
            Variant::P3 => "p3",
            Variant::P4 => "p4",
        }
    }

    /// P3/P4 reduce the embeddings spectrally before clustering.
    pub fn uses_spectral(self) -> bool {
        matches!(self, Variant::P3 | Variant::P4)
    }

    /// P2/P4 initialize pre-training from k-means labels instead of a
    /// random balanced shuffle.
    pub fn uses_kmeans_init(self) -> bool {
        matches!(self, Variant::P2 | Variant::P4)
    }
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub variant: Variant,
    pub ganmm: GanmmConfig,
    pub frame_period: f64,
    pub median_kernel: usize,
    pub max_speakers: usize,
    pub kmeans_restarts: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            variant: Variant::P4,
            ganmm: GanmmConfig::default(),
            frame_period: 0.01,
            median_kernel: 361,
            max_speakers: 10,
            kmeans_restarts: 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiarizeOutcome<F> {
    pub turns: Vec<Turn>,
    pub n_speakers: usize,
    pub speakers_estimated: bool,
    pub partition: Partition<F>,
    pub history: FitHistory,
}

/// Run one variant over a session: (optionally) estimate the speaker count
/// by eigengap, build the variant's feature space, fit the mixture, and emit
/// median-smoothed hypothesis turns.
pub fn diarize_stream<F: Real>(
    stream: &EmbeddingStream<F>,
    sad: &[SpeechRegion],
    n_speakers: Option<usize>,
    cfg: &PipelineConfig,
) -> Result<DiarizeOutcome<F>> {
    if sad.is_empty() {
        return Err(Error::Invalid("no speech regions given".into()));
    }
    let n_segments = stream.len();
    let raw_rows: Vec<Vec<F>> = stream.segments.iter().map(|s| s.vector.clone()).collect();
    let raw = Mat::from_rows(&raw_rows)?;

    let need_affinity = n_speakers.is_none() || cfg.variant.uses_spectral();
    let affinity = if need_affinity {
        Some(cosine_affinity(stream)?)
    } else {
        None
    };

    let (n, estimated) = match n_speakers {
        Some(n) => {
            if n < 2 || n > n_segments {
                return Err(Error::Config(format!(
                    "speaker count {n} out of range 2..={n_segments}"
                )));
            }
            (n, false)
        }
        None => (
            estimate_num_speakers(affinity.as_ref().expect("computed above"), cfg.max_speakers)?,
            true,
        ),
    };
    if n < 2 {
        return Err(Error::Numeric(format!(
            "estimated speaker count {n} cannot drive the mixture"
        )));
    }

    let features = if cfg.variant.uses_spectral() {
        spectral_embed(affinity.as_ref().expect("computed above"), n)?
    } else {
        raw
    };

    let init_labels = if cfg.variant.uses_kmeans_init() {
        kmeans(&features, n, cfg.ganmm.seed, cfg.kmeans_restarts)?.labels
    } else {
        random_balanced_labels(n_segments, n, cfg.ganmm.seed)
    };

    let mut ganmm_cfg = cfg.ganmm.clone();
    ganmm_cfg.n_clusters = n;
    let (_model, partition, history) = fit(&features, &ganmm_cfg, &init_labels)?;

    let timeline = segments_to_frames(&stream.intervals(), &partition, sad, cfg.frame_period)?;
    let smoothed = median_smooth(&timeline, cfg.median_kernel)?;
    let turns = frames_to_turns(&smoothed);

    Ok(DiarizeOutcome {
        turns,
        n_speakers: n,
        speakers_estimated: estimated,
        partition,
        history,
    })
}
