use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::{resample_nn, BlockGeometry};
use crate::pipeline::triage::Triage;
use crate::pipeline::validate::FrameVerdict;
use crate::pipeline::PipelineConfig;
use crate::prnu::correlation::Correlator;
use crate::prnu::Frame;
use crate::search::check_coverage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Match,
    NoMatch,
}

/// Full-frame residual of one analysed frame with its weights. Aligning a
/// block samples the whole frame so that content moved across the block
/// border is recovered.
#[derive(Clone, Debug)]
pub struct FrameBlock {
    pub frame_index: usize,
    pub residual: Field,
    pub weights: Field,
}

/// Aggregated PRNU estimate built from the rank-r transforms of all frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEstimate {
    /// 1-based rank.
    pub rank: usize,
    pub contributing_frames: Vec<usize>,
    pub pce: f64,
    pub peak_xy: Option<(i64, i64)>,
    pub peak_corr: f64,
    #[serde(skip)]
    pub estimate: Option<Field>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoVerdict {
    pub triage: Triage,
    pub rank_estimates: Vec<RankEstimate>,
    pub decision: Decision,
    /// Score compared against the decision threshold: the
    /// `min_rank_matches`-th largest rank PCE on the strong path, the
    /// fingerprint PCE otherwise.
    pub decision_score: f64,
    pub frames_analyzed: usize,
    pub frames_eliminated: usize,
}

/// Per-pixel weights of a frame: its own mask when present, else ones.
pub fn weight_mask_default(frame: &Frame) -> Field {
    match &frame.weight_mask {
        Some(m) => m.clone(),
        None => Field::filled(frame.width(), frame.height(), 1.0),
    }
}

/// `sum(w * v) / sum(w)` per pixel over the valid samples of each item.
/// Pixels with zero total weight are 0 and marked invalid.
pub fn weighted_average(items: &[(&Field, &Field, &[bool])]) -> Result<(Field, Vec<bool>)> {
    let (first, _, _) = items.first().ok_or(Error::Empty("aggregation inputs"))?;
    let (w, h) = first.dims();
    let mut num = Field::zeros(w, h);
    let mut den = vec![0.0; w * h];
    for (values, weights, valid) in items {
        first.same_dims(values)?;
        first.same_dims(weights)?;
        let n = num.as_mut_slice();
        for i in 0..w * h {
            if valid[i] {
                let wt = weights.as_slice()[i];
                n[i] += wt * values.as_slice()[i];
                den[i] += wt;
            }
        }
    }
    let valid: Vec<bool> = den.iter().map(|d| *d > 0.0).collect();
    for (v, d) in num.as_mut_slice().iter_mut().zip(&den) {
        *v = if *d > 0.0 { *v / d } else { 0.0 };
    }
    Ok((num, valid))
}

/// Match iff at least `min_matches` PCEs reach the threshold.
pub fn decide(pces: &[f64], threshold: f64, min_matches: usize) -> Decision {
    if pces.iter().filter(|p| **p >= threshold).count() >= min_matches {
        Decision::Match
    } else {
        Decision::NoMatch
    }
}

/// The `k`-th largest value, or 0 when there are fewer than `k`.
pub(crate) fn kth_largest(values: &[f64], k: usize) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    if k == 0 {
        return 0.0;
    }
    v.get(k - 1).copied().unwrap_or(0.0)
}

/// Builds one estimate per rank from the validated rank-r transforms, matches
/// each against the reference and applies the rank-count decision rule.
pub fn aggregate_and_decide(
    verdicts: &[FrameVerdict],
    blocks: &[FrameBlock],
    reference: &Field,
    geom: &BlockGeometry,
    cfg: &PipelineConfig,
) -> Result<VideoVerdict> {
    if verdicts.len() != blocks.len() {
        return Err(Error::InvalidConfig(format!(
            "{} verdicts but {} frame blocks",
            verdicts.len(),
            blocks.len()
        )));
    }
    let m = cfg.search.shift_range;
    let s = geom.block_size;
    check_coverage(reference, geom, m)?;
    let window = reference.crop(geom.block_origin.0 - m, geom.block_origin.1 - m, s + 2 * m, s + 2 * m)?;
    let corr = Correlator::new(&window, s, s, m)?;
    let mut ws = corr.workspace();

    let mut ranks = Vec::new();
    for r in 0..cfg.search.top_k {
        let mut aligned = Vec::new();
        let mut contributing = Vec::new();
        for (v, fb) in verdicts.iter().zip(blocks) {
            if !v.validated.get(r).copied().unwrap_or(false) {
                continue;
            }
            let t = v.top_k[r].homography(geom)?;
            let o = (geom.block_origin.0 as i64, geom.block_origin.1 as i64);
            let a = resample_nn(&fb.residual, (0, 0), &t, o, s, s);
            let wt = resample_nn(&fb.weights, (0, 0), &t, o, s, s);
            aligned.push((a, wt));
            contributing.push(v.frame_index);
        }
        if contributing.is_empty() {
            continue;
        }
        let items: Vec<(&Field, &Field, &[bool])> = aligned
            .iter()
            .map(|(a, wt)| (&a.values, &wt.values, a.valid.as_slice()))
            .collect();
        let (estimate, valid) = weighted_average(&items)?;
        let (pce, peak_xy, peak_corr) = match corr.surface(&estimate, Some(&valid), &mut ws) {
            Ok(surf) => {
                let p = surf.pce(cfg.search.exclude_radius);
                (p.pce, Some(p.peak_xy), p.peak_corr)
            }
            Err(Error::ZeroVariance) => (0.0, None, 0.0),
            Err(e) => return Err(e),
        };
        ranks.push(RankEstimate {
            rank: r + 1,
            contributing_frames: contributing,
            pce,
            peak_xy,
            peak_corr,
            estimate: Some(estimate),
        });
    }
    let pces: Vec<f64> = ranks.iter().map(|e| e.pce).collect();
    Ok(VideoVerdict {
        triage: Triage::StronglyStabilized,
        decision: decide(&pces, cfg.decision_threshold, cfg.min_rank_matches),
        decision_score: kth_largest(&pces, cfg.min_rank_matches),
        frames_analyzed: verdicts.len(),
        frames_eliminated: verdicts.iter().filter(|v| v.eliminated()).count(),
        rank_estimates: ranks,
    })
}
