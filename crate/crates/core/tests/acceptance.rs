//! Acceptance suite. Runs every criterion (or those named on the command
//! line, e.g. `cargo test --test acceptance -- 3 8`) and prints one
//! PASS/FAIL line each; exits non-zero if any fails.

use std::io::Write as _;
use std::process::ExitCode;
use std::time::Instant;

use prnustab::geometry::{decompose_fixed_vertex, resample_nn, BlockGeometry, Corner, CornerWarp};
use prnustab::pipeline::{
    aggregate_and_decide, decide, weight_mask_default, Decision, FrameBlock, FrameVerdict, PipelineConfig, Triage,
    ValidationParams,
};
use prnustab::prnu::correlation::{compute_pce, ncc_surface, ncc_surface_masked};
use prnustab::search::search;
use prnustab::synth::experiments::roc_experiment;
use prnustab::synth::oracle::{direct_ncc_surface, exhaustive_small_search};
use prnustab::synth::{
    generate_video, random_warp, reference_fingerprint, render_frame, stabilize_frame, textured_scene, transformed_block,
    Motion, SyntheticSensor, VideoSpec,
};
use prnustab::{extract_noise, pipeline, verify, Field, Frame, ScoredTransform, SearchConfig, Variant};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn noise(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Field {
    Field::from_fn(w, h, |_, _| StandardNormal.sample(rng))
}

/// Noise-free block cut from a random pattern through `(warp, shift)`.
struct Instance {
    reference: Field,
    geom: BlockGeometry,
    block: Field,
}

fn instance(size: usize, margin: usize, warp: &CornerWarp, shift: (i64, i64), rng: &mut ChaCha8Rng) -> Instance {
    let n = size + 2 * margin;
    let reference = noise(n, n, rng);
    let geom = BlockGeometry::new((margin, margin), size);
    let block = transformed_block(&reference, &geom, warp, shift).unwrap();
    Instance { reference, geom, block }
}

fn full_cfg(shift_range: usize) -> SearchConfig {
    SearchConfig {
        shift_range,
        ..SearchConfig::default()
    }
}

fn constrained_cfg(shift_range: usize) -> SearchConfig {
    SearchConfig {
        shift_range,
        ..SearchConfig::constrained()
    }
}

fn truth(warp: CornerWarp, shift: (i64, i64)) -> ScoredTransform {
    ScoredTransform {
        warp,
        shift,
        pce: 0.0,
        peak_corr: 0.0,
    }
}

fn timed_search(inst: &Instance, cfg: &SearchConfig) -> (Vec<ScoredTransform>, u64, f64) {
    let t = Instant::now();
    let (top, trace) = search(&inst.block, &inst.reference, &inst.geom, cfg).unwrap();
    (top, trace.transforms_evaluated, t.elapsed().as_secs_f64())
}

/// Evaluation counts and runtimes of both search variants.
fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let warp = CornerWarp::from_components([2, -1, 0, 3, -2, 1, 1, 1]);
    let mut lines = Vec::new();
    let mut pass = true;
    // (block size, full limit s, constrained limit s, combined limit s)
    for (size, full_limit, con_limit, both_limit) in [(128usize, f64::MAX, f64::MAX, 120.0), (500, 3600.0, 480.0, f64::MAX)] {
        let inst = instance(size, 60, &warp, (7, -3), &mut rng);
        let (_, full_n, full_t) = timed_search(&inst, &full_cfg(50));
        let (_, con_n, con_t) = timed_search(&inst, &constrained_cfg(50));
        let ok = full_n == 72_171
            && con_n == 8_019
            && full_t <= full_limit
            && con_t <= con_limit
            && full_t + con_t <= both_limit;
        pass &= ok;
        lines.push(format!("{size}px full {full_n} in {full_t:.0}s, constrained {con_n} in {con_t:.0}s"));
    }
    outcome(pass, lines.join("; "))
}

/// Exact recovery of on-lattice transforms by both variants.
fn criterion_2() -> Outcome {
    let (size, m) = (128usize, 50i64);
    let mut full_ok = 0;
    let mut con_ok = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut c = [0i32; 8];
        for v in c.iter_mut() {
            *v = rng.random_range(-7..=7);
        }
        let warp = CornerWarp::from_components(c);
        let shift = (rng.random_range(-m..=m), rng.random_range(-m..=m));
        let inst = instance(size, 60, &warp, shift, &mut rng);
        let (top, _, _) = timed_search(&inst, &full_cfg(m as usize));
        if top[0].corner_displacements() == truth(warp, shift).corner_displacements() {
            full_ok += 1;
        }

        // Corner A moves too; the other corners stay within 7 of it and the
        // total shift of corner A stays within the shift range.
        let a = [rng.random_range(-7..=7), rng.random_range(-7..=7)];
        let mut d = [a; 4];
        for corner in d.iter_mut().skip(1) {
            corner[0] += rng.random_range(-7..=7);
            corner[1] += rng.random_range(-7..=7);
        }
        let warp = CornerWarp::new(d);
        let total = (rng.random_range(-m..=m), rng.random_range(-m..=m));
        let shift = (total.0 - a[0] as i64, total.1 - a[1] as i64);
        let inst = instance(size, 70, &warp, shift, &mut rng);
        let (top, _, _) = timed_search(&inst, &constrained_cfg(m as usize));
        let (rel, (sx, sy)) = decompose_fixed_vertex(&warp);
        let expected = truth(rel, (shift.0 + sx as i64, shift.1 + sy as i64));
        if top[0].warp == expected.warp && top[0].shift == expected.shift {
            con_ok += 1;
        }
    }
    outcome(
        full_ok == 20 && con_ok == 20,
        format!("full {full_ok}/20, constrained {con_ok}/20 (block 128, shifts within 50)"),
    )
}

/// FFT correlation against the direct definition, and the ±1 search against
/// the exhaustive oracle.
fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_pce = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let x = noise(64, 64, &mut rng);
        let y = if seed % 2 == 0 { x.roll(rng.random_range(-20..=20), rng.random_range(-20..=20)) } else { noise(64, 64, &mut rng) };
        let fast = ncc_surface(&x, &y, 31).unwrap();
        let slow = direct_ncc_surface(&x, None, &y, 31).unwrap();
        let scale = slow.values().as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let err = fast
            .values()
            .as_slice()
            .iter()
            .zip(slow.values().as_slice())
            .fold(0.0f64, |a, (p, q)| a.max((p - q).abs()))
            / scale;
        worst = worst.max(err);
        let (pf, ps) = (fast.pce(5).pce, slow.pce(5).pce);
        worst_pce = worst_pce.max((pf - ps).abs() / ps.abs());
    }
    let mut agree = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3100 + seed);
        let warp = random_warp(&mut rng, 1, None);
        let shift = (rng.random_range(-6..=6), rng.random_range(-6..=6));
        let inst = instance(48, 12, &warp, shift, &mut rng);
        let oracle = exhaustive_small_search(&inst.block, &inst.reference, &inst.geom, 1, None, 6, 2).unwrap();
        let cfg = SearchConfig {
            level_steps: vec![1],
            candidates_per_level: vec![1],
            shift_range: 6,
            exclude_radius: 2,
            variant: Variant::Full,
            ..SearchConfig::default()
        };
        let (top, _) = search(&inst.block, &inst.reference, &inst.geom, &cfg).unwrap();
        if top[0].warp == oracle.warp && top[0].shift == oracle.shift && top[0].pce == oracle.pce {
            agree += 1;
        }
    }
    outcome(
        worst < 1e-6 && worst_pce < 1e-6 && agree == 10,
        format!("max rel err surface {worst:.1e}, pce {worst_pce:.1e} over 50; oracle argmax {agree}/10"),
    )
}

/// PCE kept after a warp and its nearest-neighbor inversion.
fn criterion_4() -> Outcome {
    let (strength, sigma) = (0.0075, 5.0);
    let sensor = SyntheticSensor::new(256, 256, strength, 11);
    let rf = reference_fingerprint(&sensor, 30, sigma, 3.0, 5).unwrap();
    let geom = BlockGeometry::centered(256, 256, 128).unwrap();
    let m = 50;
    let window = rf.values().crop(14, 14, 228, 228).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut plain, mut round_trip) = (0.0, 0.0);
    let n = 50;
    for i in 0..n {
        let scene = textured_scene(256, 256, 100 + i as u64);
        let frame = render_frame(&scene, &sensor, sigma, 200 + i as u64, i).unwrap();
        let r = extract_noise(&frame, 3.0).unwrap();
        let block = r.values.crop(64, 64, 128, 128).unwrap();
        plain += compute_pce(&block, &window, m, 5).unwrap().pce;
        let warp = random_warp(&mut rng, 7, None);
        let shift = (rng.random_range(-10..=10), rng.random_range(-10..=10));
        let stabilized = stabilize_frame(&frame, &geom, &warp, shift).unwrap();
        let r2 = extract_noise(&stabilized, 3.0).unwrap();
        let h = truth(warp, shift).homography(&geom).unwrap();
        let undone = resample_nn(&r2.values, (0, 0), &h, (64, 64), 128, 128);
        round_trip += ncc_surface_masked(&undone.values, Some(&undone.valid), &window, m).unwrap().pce(5).pce;
    }
    let (plain, round_trip) = (plain / n as f64, round_trip / n as f64);
    let ratio = round_trip / plain;
    outcome(
        (160.0..=240.0).contains(&plain) && ratio >= 0.6,
        format!("self-match {plain:.1}, after round trip {round_trip:.1}, ratio {ratio:.3} over {n} frames"),
    )
}

/// Triage labels on unstabilized, affine and strongly stabilized videos.
fn criterion_5() -> Outcome {
    let (strength, sigma, size) = (0.02, 2.0, 256);
    let mut cfg = PipelineConfig {
        block_size: 128,
        ..PipelineConfig::default()
    };
    cfg.search.shift_range = 20;
    let mut correct = 0;
    let mut misses = Vec::new();
    for seed in 0..10u64 {
        let cam = SyntheticSensor::new(size, size, strength, 1000 + seed);
        let rf = reference_fingerprint(&cam, 30, sigma, 3.0, 77 + seed).unwrap();
        let cases = [
            (Triage::Unstabilized, Motion::Static),
            (
                Triage::WeaklyStabilized,
                Motion::Similarity {
                    max_rotation_deg: 1.5,
                    max_scale_dev: 0.01,
                    max_shift: 20,
                },
            ),
            (
                Triage::StronglyStabilized,
                Motion::Mesh {
                    amplitude: 10.0,
                    smoothness: 4.0,
                    max_shift: 20,
                },
            ),
        ];
        for (expected, motion) in cases {
            let spec = VideoSpec {
                n_frames: 6,
                noise_sigma: sigma,
                blur_sigma: 0.0,
                iframe_interval: 0,
                block_size: 128,
                motion,
                seed: 300 + seed,
            };
            let v = generate_video(&cam, &spec).unwrap();
            let got = pipeline::triage(&v.frames, &rf, &cfg).unwrap().label;
            if got == expected {
                correct += 1;
            } else {
                misses.push(format!("seed {seed} {expected:?} as {got:?}"));
            }
        }
    }
    outcome(correct >= 28, format!("{correct}/30 correct {misses:?}"))
}

fn c6_config() -> PipelineConfig {
    PipelineConfig {
        block_size: 128,
        force_strong: true,
        search: constrained_cfg(8),
        validation: ValidationParams {
            pce_vld: 28.0,
            n_sub: 2,
            pce_sub: 2.0,
        },
        ..PipelineConfig::default()
    }
}

fn c6_video(sensor: &SyntheticSensor, seed: u64) -> Vec<Frame> {
    let spec = VideoSpec {
        n_frames: 5,
        noise_sigma: 5.0,
        blur_sigma: 0.0,
        iframe_interval: 0,
        block_size: 128,
        motion: Motion::Corner {
            window: 4,
            max_shift: 4,
            pinned: Some(Corner::A),
        },
        seed: 300 + seed,
    };
    generate_video(sensor, &spec).unwrap().frames
}

/// Separation of matched and mismatched strongly stabilized videos.
fn criterion_6() -> Outcome {
    let (strength, sigma, size) = (0.0075, 5.0, 160);
    let cfg = c6_config();
    let (mut matched, mut mismatched) = (Vec::new(), Vec::new());
    for seed in 0..20u64 {
        let cam = SyntheticSensor::new(size, size, strength, 1000 + seed);
        let other = SyntheticSensor::new(size, size, strength, 5000 + seed);
        let rf = reference_fingerprint(&cam, 30, sigma, 3.0, 77 + seed).unwrap();
        matched.push(verify(&c6_video(&cam, seed), &rf, &cfg).unwrap());
        mismatched.push(verify(&c6_video(&other, seed), &rf, &cfg).unwrap());
    }
    let roc = roc_experiment(&matched, &mismatched).unwrap();
    let tpr = roc.best_at_zero_fpr().map_or(0.0, |p| p.tpr);
    let mean_elim = |rs: &[prnustab::VerifyReport]| {
        rs.iter().map(|r| r.verdict.frames_eliminated as f64).sum::<f64>() / rs.len() as f64
    };
    let (em, ex) = (mean_elim(&matched), mean_elim(&mismatched));
    let (mut block_sum, mut block_n, mut agg_sum) = (0.0, 0usize, 0.0);
    for r in &matched {
        for f in r.frames.iter().filter(|f| !f.eliminated()) {
            block_sum += f.best_pce();
            block_n += 1;
        }
        agg_sum += r.verdict.rank_estimates.first().map_or(0.0, |e| e.pce);
    }
    let mean_block = block_sum / block_n.max(1) as f64;
    let mean_agg = agg_sum / matched.len() as f64;
    outcome(
        tpr >= 0.8 && ex > em && mean_agg > mean_block,
        format!(
            "TPR {tpr:.2} at FPR 0; mean eliminated matched {em:.2} vs mismatched {ex:.2}; matched mean block PCE {mean_block:.1} vs aggregate {mean_agg:.1}"
        ),
    )
}

/// Byte-identical outputs across repeated runs and pool sizes.
fn criterion_7() -> Outcome {
    let cam = SyntheticSensor::new(160, 160, 0.0075, 42);
    let rf = reference_fingerprint(&cam, 20, 5.0, 3.0, 7).unwrap();
    let run = |threads: usize| -> (String, String, String) {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let frames = c6_video(&cam, 9);
            let pixels = frames
                .iter()
                .flat_map(|f| f.pixels.as_slice().iter().map(|v| format!("{:016x}", v.to_bits())))
                .collect::<String>();
            let strong = verify(&frames, &rf, &c6_config()).unwrap().to_json().unwrap();
            let mut cfg = c6_config();
            cfg.force_strong = false;
            let spec = VideoSpec {
                n_frames: 6,
                noise_sigma: 5.0,
                blur_sigma: 0.0,
                iframe_interval: 0,
                block_size: 128,
                motion: Motion::Similarity {
                    max_rotation_deg: 1.0,
                    max_scale_dev: 0.01,
                    max_shift: 8,
                },
                seed: 5,
            };
            let v = generate_video(&cam, &spec).unwrap();
            let triaged = verify(&v.frames, &rf, &cfg).unwrap().to_json().unwrap();
            (pixels, strong, triaged)
        })
    };
    let a = run(1);
    let b = run(1);
    let c = run(4);
    let same = a == b && a == c;
    outcome(same, format!("reports and frames identical across 2 runs at 1 thread and 1 run at 4 threads: {same}"))
}

/// Hand-worked decision-rule examples.
fn criterion_8() -> Outcome {
    let p = ValidationParams::FULL;
    let mut checks = vec![
        ("3-of-5 match", decide(&[65.0, 62.0, 61.0, 40.0, 10.0], 60.0, 3) == Decision::Match),
        ("3-of-5 no match", decide(&[90.0, 88.0, 55.0, 20.0, 5.0], 60.0, 3) == Decision::NoMatch),
        ("validation accept", p.accepts(30.0, &[3.1, 0.5, 2.4, 1.0])),
        ("validation pce below", !p.accepts(27.9, &[99.0; 4])),
        ("validation no subs", !p.accepts(50.0, &[1.9; 4])),
    ];
    // Every frame eliminated: no match at any threshold, no estimates.
    let geom = BlockGeometry::new((16, 16), 32);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let reference = noise(64, 64, &mut rng);
    let frame = Frame::new(noise(64, 64, &mut rng), 0).unwrap();
    let t = truth(CornerWarp::IDENTITY, (0, 0));
    let verdicts: Vec<FrameVerdict> = (0..5)
        .map(|i| FrameVerdict {
            frame_index: i,
            top_k: vec![t; 5],
            validated: vec![false; 5],
            sub_pces: vec![[0.0; 4]; 5],
            transforms_evaluated: 0,
            unique_evaluations: 0,
            low_information: false,
        })
        .collect();
    let blocks: Vec<FrameBlock> = (0..5)
        .map(|i| FrameBlock {
            frame_index: i,
            residual: frame.pixels.clone(),
            weights: weight_mask_default(&frame),
        })
        .collect();
    let mut all_no_match = true;
    for threshold in [0.0, 1.0, 60.0] {
        let cfg = PipelineConfig {
            block_size: 32,
            decision_threshold: threshold,
            search: full_cfg(8),
            ..PipelineConfig::default()
        };
        let v = aggregate_and_decide(&verdicts, &blocks, &reference, &geom, &cfg).unwrap();
        all_no_match &= v.decision == Decision::NoMatch && v.rank_estimates.is_empty() && v.frames_eliminated == 5;
    }
    checks.push(("all eliminated gives no match", all_no_match));
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(failed.is_empty(), format!("{}/{} examples, failed {failed:?}", checks.len() - failed.len(), checks.len()))
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let o = f();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n}: {status} ({}; {:.0}s)", o.detail, t.elapsed().as_secs_f64());
        let _ = std::io::stdout().flush();
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
