//! Command-line front end: diarize sessions, score hypotheses, and generate
//! synthetic fixtures.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ganmm::ingest::{load_embeddings, load_rttm, load_sad, write_embeddings, write_rttm, write_sad};
use ganmm::mixture::GanmmConfig;
use ganmm::pipeline::{diarize_stream, DiarizeOutcome, PipelineConfig, Variant};
use ganmm::scoring::{aggregate_reports, compute_der, minority_speaker_error, SessionScore};
use ganmm::spectral::{cosine_affinity, laplacian_eigenvalues};
use ganmm::synthetic::{generate_session, SynthSpec};
use ganmm::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ganmm",
    version,
    about = "GAN-mixture-model speaker diarization on precomputed segment embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Diarize one session from an embeddings table and oracle SAD regions
    Diarize(DiarizeArgs),
    /// Score hypothesis RTTM against reference RTTM (files or directories)
    Score(ScoreArgs),
    /// Generate a synthetic session: embeddings, SAD, and reference RTTM
    Synth(SynthArgs),
}

#[derive(Args)]
struct DiarizeArgs {
    /// Embeddings table: '#dim D' header, then 'start end v1 .. vD' rows
    #[arg(long)]
    embeddings: PathBuf,
    /// Oracle speech regions, one 'start end' pair per line
    #[arg(long)]
    sad: PathBuf,
    /// Pipeline variant: p1 raw+random, p2 raw+kmeans, p3 spectral+random,
    /// p4 spectral+kmeans
    #[arg(long, default_value = "p4")]
    variant: String,
    /// Speaker count, or 'auto' for eigengap estimation
    #[arg(long, default_value = "auto")]
    speakers: String,
    /// Training config file (key = value); defaults to desk-scale settings
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Hypothesis RTTM output path; '<out>.manifest' is written alongside
    #[arg(long)]
    out: PathBuf,
    /// Median smoothing kernel in frames (odd)
    #[arg(long, default_value_t = 361)]
    kernel: usize,
    /// Frame period in seconds (whole milliseconds)
    #[arg(long, default_value_t = 0.01)]
    frame_period: f64,
    /// Eigengap search ceiling when estimating the speaker count
    #[arg(long, default_value_t = 10)]
    max_speakers: usize,
    /// Dump ascending Laplacian eigenvalues here, one per line
    #[arg(long)]
    dump_eigenvalues: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Reference RTTM file, or a directory of them in batch mode
    #[arg(long)]
    reference: PathBuf,
    /// Hypothesis RTTM file, or a directory with matching file names
    #[arg(long)]
    hypothesis: PathBuf,
    /// Forgiveness collar around reference boundaries, seconds
    #[arg(long, default_value_t = 0.25)]
    collar: f64,
    /// Score overlapped reference speech instead of excluding it
    #[arg(long)]
    score_overlap: bool,
    /// Also report minority speaker error at this speech-share threshold
    #[arg(long)]
    minority_threshold: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for <name>.emb, <name>.sad, <name>.rttm
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "session")]
    name: String,
    #[arg(long, default_value_t = 2)]
    speakers: usize,
    /// Session length in seconds
    #[arg(long, default_value_t = 180.0)]
    span: f64,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    /// Inter-speaker mean distance in within-speaker standard deviations
    #[arg(long, default_value_t = 6.0)]
    separation: f64,
    /// Mean turn duration in seconds
    #[arg(long, default_value_t = 5.0)]
    mean_turn: f64,
    /// Make speaker 0 hold less than this fraction of the speech
    #[arg(long)]
    minority: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Diarize(args) => cmd_diarize(args),
        Command::Score(args) => cmd_score(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ));
    }
    Ok(())
}

fn cmd_diarize(args: DiarizeArgs) -> Result<()> {
    require_file(&args.embeddings)?;
    require_file(&args.sad)?;
    let variant = Variant::parse(&args.variant)?;
    let speakers: Option<usize> = match args.speakers.as_str() {
        "auto" => None,
        s => Some(s.parse().map_err(|_| {
            Error::Config(format!("--speakers expects an integer or 'auto', got '{s}'"))
        })?),
    };
    let mut ganmm_cfg = match &args.config {
        Some(path) => GanmmConfig::load(path)?,
        None => GanmmConfig::desk_scale(),
    };
    if let Some(seed) = args.seed {
        ganmm_cfg.seed = seed;
    }

    let stream = load_embeddings::<f64>(&args.embeddings)?;
    let sad = load_sad(&args.sad)?;
    let cfg = PipelineConfig {
        variant,
        ganmm: ganmm_cfg,
        frame_period: args.frame_period,
        median_kernel: args.kernel,
        max_speakers: args.max_speakers,
        ..PipelineConfig::default()
    };

    if let Some(dump) = &args.dump_eigenvalues {
        let affinity = cosine_affinity(&stream)?;
        let values = laplacian_eigenvalues(&affinity)?;
        let mut text = String::new();
        for v in values {
            let _ = writeln!(text, "{v:.12}");
        }
        std::fs::write(dump, text).map_err(|e| Error::io(dump, e))?;
    }

    let outcome = diarize_stream(&stream, &sad, speakers, &cfg)?;
    write_rttm(&outcome.turns, &stream.session_id, &args.out)?;

    let manifest_path = manifest_path_for(&args.out);
    std::fs::write(&manifest_path, render_manifest(&args, &cfg, &outcome))
        .map_err(|e| Error::io(&manifest_path, e))?;

    println!(
        "{}: {} speakers ({}), {} turns, {} EM iterations{} -> {}",
        stream.session_id,
        outcome.n_speakers,
        if outcome.speakers_estimated { "estimated" } else { "given" },
        outcome.turns.len(),
        outcome.history.iterations.len(),
        if outcome.history.stopped_early { " (early stop)" } else { "" },
        args.out.display()
    );
    Ok(())
}

fn manifest_path_for(out: &Path) -> PathBuf {
    let mut os = out.as_os_str().to_owned();
    os.push(".manifest");
    PathBuf::from(os)
}

fn render_manifest(args: &DiarizeArgs, cfg: &PipelineConfig, outcome: &DiarizeOutcome<f64>) -> String {
    let mut s = String::new();
    s.push_str("ganmm-run v1\n");
    let _ = writeln!(s, "variant = {}", cfg.variant.as_str());
    let _ = writeln!(s, "speakers_requested = {}", args.speakers);
    let _ = writeln!(s, "n_speakers = {}", outcome.n_speakers);
    let _ = writeln!(s, "speakers_estimated = {}", outcome.speakers_estimated);
    let _ = writeln!(s, "seed = {}", cfg.ganmm.seed);
    let _ = writeln!(s, "median_kernel = {}", cfg.median_kernel);
    let _ = writeln!(s, "frame_period = {}", cfg.frame_period);
    let _ = writeln!(s, "max_speakers = {}", cfg.max_speakers);
    let _ = writeln!(s, "embeddings = {}", args.embeddings.display());
    let _ = writeln!(s, "sad = {}", args.sad.display());
    let _ = writeln!(s, "em_iterations = {}", outcome.history.iterations.len());
    let _ = writeln!(s, "stopped_early = {}", outcome.history.stopped_early);
    s.push_str("[config]\n");
    s.push_str(&cfg.ganmm.to_config_string());
    s
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    if args.reference.is_dir() != args.hypothesis.is_dir() {
        return Err(Error::Config(
            "reference and hypothesis must both be files or both be directories".into(),
        ));
    }
    if args.reference.is_dir() {
        return score_batch(&args);
    }
    require_file(&args.reference)?;
    require_file(&args.hypothesis)?;
    let reference = load_rttm(&args.reference)?;
    let hypothesis = load_rttm(&args.hypothesis)?;
    let report = compute_der(&reference, &hypothesis, args.collar, args.score_overlap)?;
    print!("{}", report.to_text());
    if let Some(threshold) = args.minority_threshold {
        let span = reference.iter().map(|t| t.end()).fold(0.0, f64::max);
        let err = minority_speaker_error(&reference, &hypothesis, threshold, span)?;
        println!("minority speaker error: {:.2}%", err * 100.0);
    }
    println!("---");
    print!("{}", report.to_key_values());
    Ok(())
}

fn score_batch(args: &ScoreArgs) -> Result<()> {
    let mut names: Vec<String> = std::fs::read_dir(&args.reference)
        .map_err(|e| Error::io(&args.reference, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".rttm"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Invalid(format!(
            "no .rttm files in {}",
            args.reference.display()
        )));
    }
    let mut scores = Vec::new();
    for name in &names {
        let ref_path = args.reference.join(name);
        let hyp_path = args.hypothesis.join(name);
        require_file(&hyp_path)?;
        let reference = load_rttm(&ref_path)?;
        let hypothesis = load_rttm(&hyp_path)?;
        let report = compute_der(&reference, &hypothesis, args.collar, args.score_overlap)?;
        let span = reference.iter().map(|t| t.end()).fold(0.0, f64::max);
        println!(
            "{name}: DER {:.2}% (miss {:.3}s fa {:.3}s conf {:.3}s)",
            report.der * 100.0,
            report.miss,
            report.false_alarm,
            report.confusion
        );
        scores.push(SessionScore {
            session: name.clone(),
            span,
            report,
        });
    }
    let agg = aggregate_reports(&scores)?;
    println!(
        "aggregate: mean DER {:.2}% +- {:.2}% over {} sessions",
        agg.mean_der * 100.0,
        agg.std_der * 100.0,
        agg.sessions
    );
    for b in &agg.buckets {
        match b.mean_der {
            Some(m) => println!(
                "bucket {}: {} sessions, mean DER {:.2}%",
                b.label,
                b.sessions,
                m * 100.0
            ),
            None => println!("bucket {}: 0 sessions", b.label),
        }
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n_speakers: args.speakers,
        session_span: args.span,
        embedding_dim: args.dim,
        speaker_separation: args.separation,
        mean_turn: args.mean_turn,
        minority_fraction: args.minority,
        seed: args.seed,
    };
    let session = generate_session::<f64>(&spec)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let emb = args.out.join(format!("{}.emb", args.name));
    let sad = args.out.join(format!("{}.sad", args.name));
    let rttm = args.out.join(format!("{}.rttm", args.name));
    write_embeddings(&session.stream, &emb)?;
    write_sad(&session.sad, &sad)?;
    write_rttm(&session.reference, &args.name, &rttm)?;
    println!(
        "wrote {} segments, {} turns, {} speakers:",
        session.stream.len(),
        session.reference.len(),
        args.speakers
    );
    println!("  {}", emb.display());
    println!("  {}", sad.display());
    println!("  {}", rttm.display());
    Ok(())
}
