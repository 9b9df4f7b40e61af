use std::fs;
use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use prnustab::geometry::{BlockGeometry, Corner, CornerWarp};
use prnustab::io::{write_frames, write_iframe_indices};
use prnustab::pipeline::REPORT_SCHEMA_VERSION;
use prnustab::search::search;
use prnustab::synth::experiments::{labeled_runs, roc_experiment, sweep_validation_params};
use prnustab::synth::oracle::exhaustive_small_search;
use prnustab::synth::{generate_video, random_warp, reference_fingerprint, transformed_block, Motion, SyntheticSensor, VideoSpec};
use prnustab::{Error, Field, Result, SearchConfig, VerifyReport};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use crate::print_json;

#[derive(Subcommand)]
pub enum SynthCommand {
    /// Render a synthetic video with its ground-truth warp log.
    Generate(GenerateArgs),
    /// Compare the block search with the exhaustive oracle on one instance.
    Oracle(OracleArgs),
    /// Sweep validation parameters over labeled verification reports.
    Sweep(LabeledArgs),
    /// ROC table over labeled verification reports.
    Roc(RocArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum MotionKind {
    Static,
    Similarity,
    Corner,
    Constrained,
    Mesh,
}

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed of the sensor (camera identity).
    #[arg(long, default_value_t = 1)]
    sensor_seed: u64,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    #[arg(long, default_value_t = 0.02)]
    strength: f64,
    #[arg(long, default_value_t = 2.0)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    blur: f64,
    #[arg(long, default_value_t = 0)]
    iframe_interval: usize,
    #[arg(long, default_value_t = 128)]
    block_size: usize,
    #[arg(long, value_enum, default_value = "corner")]
    motion: MotionKind,
    #[arg(long, default_value_t = 7)]
    window: i32,
    #[arg(long, default_value_t = 20)]
    max_shift: i64,
    #[arg(long, default_value_t = 1.5)]
    max_rotation: f64,
    #[arg(long, default_value_t = 0.01)]
    scale_dev: f64,
    #[arg(long, default_value_t = 10.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 4.0)]
    smoothness: f64,
    /// Also write a reference fingerprint of the sensor here.
    #[arg(long)]
    ref_out: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    ref_frames: usize,
}

#[derive(Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 48)]
    size: usize,
    /// Warp window of the exhaustive enumeration.
    #[arg(long, default_value_t = 1)]
    window: i32,
    #[arg(long, default_value_t = 6)]
    shift_range: usize,
    /// Pin corner A and enumerate the other three.
    #[arg(long)]
    pinned: bool,
}

#[derive(Args)]
pub struct LabeledArgs {
    /// Reports of videos from the reference camera.
    #[arg(long, num_args = 1.., required = true)]
    matched: Vec<PathBuf>,
    /// Reports of videos from other cameras.
    #[arg(long, num_args = 1.., required = true)]
    mismatched: Vec<PathBuf>,
}

#[derive(Args)]
pub struct RocArgs {
    #[command(flatten)]
    labeled: LabeledArgs,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let motion = match a.motion {
        MotionKind::Static => Motion::Static,
        MotionKind::Similarity => Motion::Similarity {
            max_rotation_deg: a.max_rotation,
            max_scale_dev: a.scale_dev,
            max_shift: a.max_shift,
        },
        MotionKind::Corner | MotionKind::Constrained => Motion::Corner {
            window: a.window,
            max_shift: a.max_shift,
            pinned: matches!(a.motion, MotionKind::Constrained).then_some(Corner::A),
        },
        MotionKind::Mesh => Motion::Mesh {
            amplitude: a.amplitude,
            smoothness: a.smoothness,
            max_shift: a.max_shift,
        },
    };
    let sensor = SyntheticSensor::new(a.width, a.height, a.strength, a.sensor_seed);
    let spec = VideoSpec {
        n_frames: a.frames,
        noise_sigma: a.noise,
        blur_sigma: a.blur,
        iframe_interval: a.iframe_interval,
        block_size: a.block_size,
        motion,
        seed: a.seed,
    };
    let video = generate_video(&sensor, &spec)?;
    let frames_dir = a.out.join("frames");
    write_frames(&video.frames, &frames_dir)?;
    let iframes = a.out.join("iframes.txt");
    write_iframe_indices(&video.frames, &iframes)?;
    let log = a.out.join("warp_log.json");
    fs::write(&log, video.log.to_json()? + "\n")?;
    if let Some(p) = &a.ref_out {
        reference_fingerprint(&sensor, a.ref_frames, a.noise, 3.0, a.sensor_seed ^ 0x5eed)?.save(p)?;
    }
    print_json(&json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "frames": frames_dir,
        "iframes": iframes,
        "warp_log": log,
        "reference": a.ref_out,
        "spec": spec,
    }))
}

fn oracle(a: &OracleArgs) -> Result<()> {
    let margin = a.shift_range + 3 * a.window.max(1) as usize + 2;
    let n = a.size + 2 * margin;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let k = Field::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let geom = BlockGeometry::new((margin, margin), a.size);
    let pinned = a.pinned.then_some(Corner::A);
    let warp = if a.pinned {
        let mut c = random_warp(&mut rng, a.window, None).components();
        c[0] = 0;
        c[1] = 0;
        CornerWarp::from_components(c)
    } else {
        random_warp(&mut rng, a.window, None)
    };
    let r = a.shift_range as i64;
    let shift = (rng.random_range(-r..=r), rng.random_range(-r..=r));
    let block = transformed_block(&k, &geom, &warp, shift)?;
    let best = exhaustive_small_search(&block, &k, &geom, a.window, pinned, a.shift_range, 2)?;
    let cfg = SearchConfig {
        level_steps: vec![1],
        candidates_per_level: vec![1],
        shift_range: a.shift_range,
        exclude_radius: 2,
        variant: if a.pinned {
            prnustab::Variant::Constrained
        } else {
            prnustab::Variant::Full
        },
        ..SearchConfig::default()
    };
    let hgs = if a.window == 1 {
        Some(search(&block, &k, &geom, &cfg)?.0[0])
    } else {
        None
    };
    print_json(&json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "truth": { "warp": warp, "shift": shift },
        "oracle": best,
        "search": hgs,
        "agree": hgs.map(|h| h.warp == best.warp && h.shift == best.shift),
    }))
}

fn load_reports(paths: &[PathBuf]) -> Result<Vec<VerifyReport>> {
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect()
}

pub fn run(cmd: &SynthCommand) -> Result<()> {
    match cmd {
        SynthCommand::Generate(a) => generate(a),
        SynthCommand::Oracle(a) => oracle(a),
        SynthCommand::Sweep(a) => {
            let mut runs = Vec::new();
            for r in load_reports(&a.matched)? {
                runs.extend(labeled_runs(&r, true));
            }
            for r in load_reports(&a.mismatched)? {
                runs.extend(labeled_runs(&r, false));
            }
            print_json(&json!({
                "schema_version": REPORT_SCHEMA_VERSION,
                "sweep": sweep_validation_params(&runs),
            }))
        }
        SynthCommand::Roc(a) => {
            let table = roc_experiment(&load_reports(&a.labeled.matched)?, &load_reports(&a.labeled.mismatched)?)?;
            if let Some(p) = &a.csv {
                fs::write(p, table.to_csv())?;
            }
            print_json(&json!({
                "schema_version": REPORT_SCHEMA_VERSION,
                "roc": table,
                "best_at_zero_fpr": table.best_at_zero_fpr(),
            }))
        }
    }
}
