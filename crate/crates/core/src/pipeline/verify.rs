use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::aggregate::{aggregate_and_decide, weight_mask_default, Decision, FrameBlock, VideoVerdict};
use crate::pipeline::triage::{residuals, triage_with, Triage, TriageReport};
use crate::pipeline::validate::{crop_center, validate_transform, FrameVerdict};
use crate::pipeline::PipelineConfig;
use crate::prnu::correlation::compute_pce;
use crate::prnu::{estimate_fingerprint, extract_noise, Fingerprint, Frame};
use crate::search::search;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Positions (into `frames`) of the frames to analyse: I frames after the
/// first one, padded with evenly spaced non-I frames when there are fewer
/// than `n`. The result is sorted.
pub fn select_frames(frames: &[Frame], n: usize) -> Vec<usize> {
    let iframes: Vec<usize> = (0..frames.len()).filter(|&i| frames[i].is_iframe).collect();
    let mut chosen: Vec<usize> = iframes.iter().skip(1).take(n).copied().collect();
    let need = n - chosen.len();
    if need > 0 {
        let pool: Vec<usize> = (0..frames.len()).filter(|&i| !frames[i].is_iframe).collect();
        if pool.len() <= need {
            chosen.extend(pool);
        } else {
            chosen.extend((0..need).map(|j| pool[((2 * j + 1) * pool.len()) / (2 * need)]));
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Block search and validation of one frame. Frames whose residual carries
/// no signal are reported with no transforms.
pub fn analyze_frame(frame: &Frame, reference: &Fingerprint, cfg: &PipelineConfig) -> Result<(FrameVerdict, FrameBlock)> {
    let residual = extract_noise(frame, cfg.denoise_strength)?;
    let (block, geom) = crop_center(&residual, cfg.block_size)?;
    let fb = FrameBlock {
        frame_index: frame.frame_index,
        residual: residual.values.clone(),
        weights: weight_mask_default(frame),
    };
    let mut verdict = FrameVerdict {
        frame_index: frame.frame_index,
        top_k: Vec::new(),
        validated: Vec::new(),
        sub_pces: Vec::new(),
        transforms_evaluated: 0,
        unique_evaluations: 0,
        low_information: residual.low_information,
    };
    if residual.low_information {
        return Ok((verdict, fb));
    }
    let (top, trace) = match search(&block, reference.values(), &geom, &cfg.search) {
        Ok(r) => r,
        Err(Error::ZeroVariance) => {
            verdict.low_information = true;
            return Ok((verdict, fb));
        }
        Err(e) => return Err(e),
    };
    verdict.transforms_evaluated = trace.transforms_evaluated;
    verdict.unique_evaluations = trace.unique_evaluations;
    for t in &top {
        let c = validate_transform(
            &block,
            t,
            reference.values(),
            &geom,
            &cfg.validation,
            cfg.search.shift_range,
            cfg.search.exclude_radius,
        )?;
        verdict.validated.push(c.validated);
        verdict.sub_pces.push(c.sub_pces);
    }
    verdict.top_k = top;
    Ok((verdict, fb))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub triage_ms: f64,
    pub frames_ms: f64,
    pub aggregation_ms: f64,
}

/// Versioned verification report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub config: PipelineConfig,
    pub n_input_frames: usize,
    pub triage: TriageReport,
    /// PCE of the whole-video fingerprint against the reference, on the
    /// unstabilized path.
    pub conventional_pce: Option<f64>,
    pub selected_frames: Vec<usize>,
    pub frames: Vec<FrameVerdict>,
    pub verdict: VideoVerdict,
    pub transforms_evaluated: u64,
    pub unique_evaluations: u64,
    /// How the weighted aggregate is normalized.
    pub aggregation_normalization: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<Timings>,
}

impl VerifyReport {
    pub fn decision(&self) -> Decision {
        self.verdict.decision
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn elapsed(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs triage and the pipeline it selects on one video.
pub fn verify(frames: &[Frame], reference: &Fingerprint, cfg: &PipelineConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    if frames.is_empty() {
        return Err(Error::TooFewFrames { need: 1, got: 0 });
    }
    let timed = cfg.search.record_timings;
    let t0 = Instant::now();
    let triage = if cfg.force_strong {
        TriageReport {
            label: Triage::StronglyStabilized,
            stb_chk: None,
            stb_chk_skipped: false,
            stb_lite: None,
            forced: true,
        }
    } else {
        let res = residuals(frames, cfg)?;
        let report = triage_with(frames, &res, reference, cfg)?;
        if report.label == Triage::Unstabilized {
            let fp = estimate_fingerprint(&res, frames)?;
            let pce = compute_pce(fp.values(), reference.values(), cfg.search.shift_range, cfg.search.exclude_radius)?.pce;
            return Ok(simple_report(frames, cfg, report, Some(pce), pce, timed.then(|| elapsed(t0))));
        }
        if report.label == Triage::WeaklyStabilized {
            let pce = report.stb_lite.as_ref().map_or(0.0, |l| l.pce);
            return Ok(simple_report(frames, cfg, report, None, pce, timed.then(|| elapsed(t0))));
        }
        report
    };
    let triage_ms = elapsed(t0);

    let t1 = Instant::now();
    let selected = select_frames(frames, cfg.n_frames);
    let analysed: Vec<(FrameVerdict, FrameBlock)> = selected
        .par_iter()
        .map(|&i| analyze_frame(&frames[i], reference, cfg))
        .collect::<Result<_>>()?;
    let frames_ms = elapsed(t1);
    let (verdicts, blocks): (Vec<FrameVerdict>, Vec<FrameBlock>) = analysed.into_iter().unzip();

    let t2 = Instant::now();
    let first = &frames[selected[0]];
    let geom = crate::geometry::BlockGeometry::centered(first.width(), first.height(), cfg.block_size)?;
    let verdict = aggregate_and_decide(&verdicts, &blocks, reference.values(), &geom, cfg)?;
    let aggregation_ms = elapsed(t2);

    Ok(VerifyReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        n_input_frames: frames.len(),
        triage,
        conventional_pce: None,
        selected_frames: selected.iter().map(|&i| frames[i].frame_index).collect(),
        transforms_evaluated: verdicts.iter().map(|v| v.transforms_evaluated).sum(),
        unique_evaluations: verdicts.iter().map(|v| v.unique_evaluations).sum(),
        frames: verdicts,
        verdict,
        aggregation_normalization: NORMALIZATION.into(),
        timings: timed.then_some(Timings {
            triage_ms,
            frames_ms,
            aggregation_ms,
        }),
    })
}

const NORMALIZATION: &str = "per_pixel_weight_sum";

fn simple_report(
    frames: &[Frame],
    cfg: &PipelineConfig,
    triage: TriageReport,
    conventional_pce: Option<f64>,
    score: f64,
    triage_ms: Option<f64>,
) -> VerifyReport {
    let decision = if score >= cfg.decision_threshold {
        Decision::Match
    } else {
        Decision::NoMatch
    };
    VerifyReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        n_input_frames: frames.len(),
        verdict: VideoVerdict {
            triage: triage.label,
            rank_estimates: Vec::new(),
            decision,
            decision_score: score,
            frames_analyzed: 0,
            frames_eliminated: 0,
        },
        triage,
        conventional_pce,
        selected_frames: Vec::new(),
        frames: Vec::new(),
        transforms_evaluated: 0,
        unique_evaluations: 0,
        aggregation_normalization: NORMALIZATION.into(),
        timings: triage_ms.map(|t| Timings {
            triage_ms: t,
            frames_ms: 0.0,
            aggregation_ms: 0.0,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;

    fn frames(flags: &[bool]) -> Vec<Frame> {
        flags
            .iter()
            .enumerate()
            .map(|(i, &f)| Frame::new(Field::zeros(2, 2), i).unwrap().with_iframe(f))
            .collect()
    }

    #[test]
    fn first_iframe_is_skipped() {
        let mut flags = vec![false; 40];
        for i in (0..40).step_by(5) {
            flags[i] = true;
        }
        assert_eq!(select_frames(&frames(&flags), 5), vec![5, 10, 15, 20, 25]);
    }

    #[test]
    fn missing_iframes_are_padded_evenly() {
        let mut flags = vec![false; 20];
        flags[0] = true;
        flags[10] = true;
        // One usable I frame, four non-I frames spread over the 18 others.
        let sel = select_frames(&frames(&flags), 5);
        assert_eq!(sel.len(), 5);
        assert!(sel.contains(&10) && !sel.contains(&0));
        assert_eq!(sel, vec![3, 7, 10, 13, 17]);
    }

    #[test]
    fn short_videos_use_everything_available() {
        assert_eq!(select_frames(&frames(&[true, false, false]), 5), vec![1, 2]);
        assert_eq!(select_frames(&frames(&[false; 3]), 5), vec![0, 1, 2]);
    }
}
