//! Command-line front end: fingerprint building, triage, verification and
//! synthetic experiments. Results go to stdout (or the named files) as
//! JSON; `verify` exits 0 on match, 1 on no match and 2 on error.

mod synth_cmd;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prnustab::io::{load_frames, FrameSelection, FrameSource, RunConfig};
use prnustab::pipeline::{triage, Decision, PipelineConfig, REPORT_SCHEMA_VERSION};
use prnustab::prnu::fingerprint::estimate_fingerprint_labeled;
use prnustab::{extract_noise, verify, Error, Fingerprint, Frame, Result};
use rayon::prelude::*;
use serde_json::json;

#[derive(Parser)]
#[command(name = "prnustab", version, about = "PRNU camera verification for stabilized video")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reference fingerprints.
    Fingerprint {
        #[command(subcommand)]
        command: FingerprintCommand,
    },
    /// Classify a video as unstabilized, weakly or strongly stabilized.
    Triage(TriageArgs),
    /// Verify a video against a reference fingerprint.
    Verify(VerifyArgs),
    /// Synthetic data and experiments.
    Synth {
        #[command(subcommand)]
        command: synth_cmd::SynthCommand,
    },
}

#[derive(Subcommand)]
enum FingerprintCommand {
    /// Estimate a fingerprint from unstabilized frames and save it.
    Build(BuildArgs),
}

/// Where frames come from: an image directory, or a raw 8-bit luma stream
/// when `--size` is given.
#[derive(Args, Clone)]
struct FrameArgs {
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Frame size `WIDTHxHEIGHT` of a raw luma stream.
    #[arg(long, value_parser = parse_size)]
    size: Option<(usize, usize)>,
    /// I-frame index file.
    #[arg(long)]
    iframes: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    src: FrameArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "")]
    label: String,
    #[arg(long, default_value_t = 3.0)]
    denoise_strength: f64,
}

#[derive(Args)]
struct TriageArgs {
    #[command(flatten)]
    src: FrameArgs,
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    src: FrameArgs,
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Skip triage and run the block search pipeline.
    #[arg(long)]
    force_strong: bool,
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    Ok((w.parse().map_err(|_| "bad width")?, h.parse().map_err(|_| "bad height")?))
}

fn frame_source(args: &FrameArgs, cfg: Option<&RunConfig>) -> Result<FrameSource> {
    let mut src = match (&args.frames, args.size) {
        (Some(p), Some((w, h))) => FrameSource::raw(p, w, h),
        (Some(p), None) => FrameSource::image_dir(p),
        (None, _) => cfg
            .and_then(|c| c.frames.clone())
            .ok_or_else(|| Error::InvalidConfig("no frame source given (--frames)".into()))?,
    };
    if let Some(i) = &args.iframes {
        src.iframe_index_file = Some(i.clone());
    }
    Ok(src)
}

fn run_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn reference_path(arg: &Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    arg.clone()
        .or_else(|| cfg.reference.clone())
        .ok_or_else(|| Error::InvalidConfig("no reference fingerprint given (--ref)".into()))
}

pub(crate) fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn error_json(e: &Error) -> serde_json::Value {
    json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "error": { "kind": e.kind(), "message": e.to_string() }
    })
}

fn build(args: &BuildArgs) -> Result<()> {
    let src = frame_source(&args.src, None)?;
    let frames = load_frames(&src, FrameSelection::All)?;
    let residuals = frames
        .par_iter()
        .map(|f| extract_noise(f, args.denoise_strength))
        .collect::<Result<Vec<_>>>()?;
    let fp = estimate_fingerprint_labeled(&residuals, &frames, &args.label)?;
    fp.save(&args.out)?;
    print_json(&json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "fingerprint": args.out,
        "width": fp.width(),
        "height": fp.height(),
        "n_sources": fp.n_sources,
        "camera_label": fp.camera_label,
    }))
}

fn load_inputs(src: &FrameArgs, reference: &Option<PathBuf>, cfg: &RunConfig) -> Result<(Vec<Frame>, Fingerprint)> {
    let path = reference_path(reference, cfg)?;
    let fp = Fingerprint::load(&path).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        e => e,
    })?;
    let frames = load_frames(&frame_source(src, Some(cfg))?, FrameSelection::All)?;
    Ok((frames, fp))
}

fn run_triage(args: &TriageArgs) -> Result<()> {
    let cfg = run_config(args.config.as_deref())?;
    let (frames, fp) = load_inputs(&args.src, &args.reference, &cfg)?;
    let report = triage(&frames, &fp, &cfg.pipeline)?;
    print_json(&json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "label": report.label,
        "stb_chk_pce": report.stb_chk.map(|c| c.pce),
        "stb_lite_pce": report.stb_lite.as_ref().map(|l| l.pce),
        "triage": report,
    }))
}

fn run_verify(args: &VerifyArgs) -> Result<Decision> {
    let cfg = run_config(args.config.as_deref())?;
    let pipeline = PipelineConfig {
        force_strong: cfg.pipeline.force_strong || args.force_strong,
        ..cfg.pipeline.clone()
    };
    let (frames, fp) = load_inputs(&args.src, &args.reference, &cfg)?;
    let report = verify(&frames, &fp, &pipeline)?;
    let text = report.to_json()?;
    match args.report.clone().or_else(|| cfg.report.clone()) {
        Some(p) => {
            fs::write(&p, text + "\n")?;
            print_json(&json!({
                "schema_version": REPORT_SCHEMA_VERSION,
                "decision": report.decision(),
                "decision_score": report.verdict.decision_score,
                "triage": report.verdict.triage,
                "report": p,
            }))?;
        }
        None => print_json(&report)?,
    }
    Ok(report.decision())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            let err = Error::InvalidConfig(format!("thread pool: {e}"));
            let _ = print_json(&error_json(&err));
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Fingerprint {
            command: FingerprintCommand::Build(a),
        } => build(a).map(|_| ExitCode::SUCCESS),
        Command::Triage(a) => run_triage(a).map(|_| ExitCode::SUCCESS),
        Command::Verify(a) => run_verify(a).map(|d| match d {
            Decision::Match => ExitCode::SUCCESS,
            Decision::NoMatch => ExitCode::from(1),
        }),
        Command::Synth { command } => synth_cmd::run(command).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = print_json(&error_json(&e));
            ExitCode::from(2)
        }
    }
}
