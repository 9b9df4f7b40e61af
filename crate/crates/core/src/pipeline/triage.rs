use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::{resample_nn, Homography};
use crate::pipeline::aggregate::{weight_mask_default, weighted_average};
use crate::pipeline::PipelineConfig;
use crate::prnu::correlation::{ncc_surface, Correlator};
use crate::prnu::{estimate_fingerprint, extract_noise, Fingerprint, Frame, NoiseResidual};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Triage {
    Unstabilized,
    WeaklyStabilized,
    StronglyStabilized,
}

/// Minimum number of frames for the first-third / last-third comparison.
pub const STB_CHK_MIN_FRAMES: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StbChk {
    pub stabilized: bool,
    pub pce: f64,
    pub peak_xy: (i64, i64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StbLiteFrame {
    pub frame_index: usize,
    pub scale: f64,
    pub rotation_deg: f64,
    pub shift: (i64, i64),
    pub pce: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StbLite {
    pub weakly_stabilized: bool,
    /// PCE of the aggregate of accepted frames; 0 when none was accepted.
    pub pce: f64,
    pub frames: Vec<StbLiteFrame>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriageReport {
    pub label: Triage,
    pub stb_chk: Option<StbChk>,
    /// Fewer frames than the stabilization check needs; it was skipped.
    pub stb_chk_skipped: bool,
    pub stb_lite: Option<StbLite>,
    /// Triage bypassed by configuration.
    pub forced: bool,
}

pub(crate) fn residuals(frames: &[Frame], cfg: &PipelineConfig) -> Result<Vec<NoiseResidual>> {
    frames.par_iter().map(|f| extract_noise(f, cfg.denoise_strength)).collect()
}

/// Compares fingerprints from the first and last thirds of the video.
pub fn stb_chk(frames: &[Frame], cfg: &PipelineConfig) -> Result<StbChk> {
    if frames.len() < STB_CHK_MIN_FRAMES {
        return Err(Error::TooFewFrames {
            need: STB_CHK_MIN_FRAMES,
            got: frames.len(),
        });
    }
    stb_chk_with(frames, &residuals(frames, cfg)?, cfg)
}

pub(crate) fn stb_chk_with(frames: &[Frame], res: &[NoiseResidual], cfg: &PipelineConfig) -> Result<StbChk> {
    let n = frames.len();
    let t = n / 3;
    let first = estimate_fingerprint(&res[..t], &frames[..t])?;
    let last = estimate_fingerprint(&res[n - t..], &frames[n - t..])?;
    // Unstabilized thirds share pixel alignment: the match is read at zero
    // displacement, not at the best shift.
    let p = match ncc_surface(first.values(), last.values(), cfg.search.shift_range) {
        Ok(s) => (s.pce_at((0, 0), cfg.search.exclude_radius).unwrap_or(0.0), s.pce(cfg.search.exclude_radius).peak_xy),
        Err(Error::ZeroVariance) => (0.0, (0, 0)),
        Err(e) => return Err(e),
    };
    Ok(StbChk {
        stabilized: p.0 < cfg.stb_chk_threshold,
        pce: p.0,
        peak_xy: p.1,
    })
}

/// Per-frame similarity search (scale, rotation, all circular shifts)
/// followed by aggregation of the frames that align.
pub fn stb_lite(frames: &[Frame], reference: &Fingerprint, cfg: &PipelineConfig) -> Result<StbLite> {
    stb_lite_with(frames, &residuals(frames, cfg)?, reference, cfg)
}

struct Aligned {
    result: StbLiteFrame,
    values: Field,
    weights: Field,
    valid: Vec<bool>,
}

pub(crate) fn stb_lite_with(
    frames: &[Frame],
    res: &[NoiseResidual],
    reference: &Fingerprint,
    cfg: &PipelineConfig,
) -> Result<StbLite> {
    let first = frames.first().ok_or(Error::TooFewFrames { need: 1, got: 0 })?;
    let (w, h) = first.pixels.dims();
    reference.values().same_dims(&first.pixels)?;
    // A shift range covering both axes makes every circular shift a candidate.
    let corr = Correlator::new(reference.values(), w, h, w.max(h))?;
    let ex = cfg.search.exclude_radius;
    let center = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let rotations = cfg.affine_search.rotations();
    let grid: Vec<(f64, f64)> = cfg
        .affine_search
        .scales
        .iter()
        .flat_map(|&s| rotations.iter().map(move |&r| (s, r)))
        .collect();

    let mut aligned = Vec::with_capacity(frames.len());
    for (frame, r) in frames.iter().zip(res) {
        frame.pixels.same_dims(&r.values)?;
        let scored: Vec<Option<(f64, (i64, i64))>> = grid
            .par_iter()
            .map_init(
                || corr.workspace(),
                |ws, &(s, deg)| {
                    let g = Homography::similarity(center, deg, s);
                    let u = resample_nn(&r.values, (0, 0), &g, (0, 0), w, h);
                    match corr.surface(&u.values, Some(&u.valid), ws) {
                        Ok(surf) => {
                            let p = surf.pce(ex);
                            Ok(Some((p.pce, p.peak_xy)))
                        }
                        Err(Error::ZeroVariance) => Ok(None),
                        Err(e) => Err(e),
                    }
                },
            )
            .collect::<Result<_>>()?;
        let mut best: Option<(usize, f64, (i64, i64))> = None;
        for (i, sc) in scored.iter().enumerate() {
            if let Some((pce, shift)) = *sc {
                if best.is_none_or(|b| pce > b.1) {
                    best = Some((i, pce, shift));
                }
            }
        }
        let Some((i, pce, shift)) = best else {
            aligned.push(None);
            continue;
        };
        let (scale, rotation_deg) = grid[i];
        let result = StbLiteFrame {
            frame_index: frame.frame_index,
            scale,
            rotation_deg,
            shift,
            pce,
            accepted: pce >= cfg.stb_lite_frame_accept,
        };
        if !result.accepted {
            aligned.push(Some(Aligned {
                result,
                values: Field::zeros(0, 0),
                weights: Field::zeros(0, 0),
                valid: Vec::new(),
            }));
            continue;
        }
        let g = Homography::similarity(center, rotation_deg, scale);
        let u = resample_nn(&r.values, (0, 0), &g, (0, 0), w, h);
        let wt = resample_nn(&weight_mask_default(frame), (0, 0), &g, (0, 0), w, h);
        // Peak at s means moving[p] = reference[p - s].
        let valid_f = Field::from_fn(w, h, |x, y| if u.valid[y * w + x] { 1.0 } else { 0.0 }).roll(-shift.0, -shift.1);
        aligned.push(Some(Aligned {
            result,
            values: u.values.roll(-shift.0, -shift.1),
            weights: wt.values.roll(-shift.0, -shift.1),
            valid: valid_f.as_slice().iter().map(|v| *v > 0.0).collect(),
        }));
    }

    let frames_out: Vec<StbLiteFrame> = aligned.iter().flatten().map(|a| a.result).collect();
    let items: Vec<(&Field, &Field, &[bool])> = aligned
        .iter()
        .flatten()
        .filter(|a| a.result.accepted)
        .map(|a| (&a.values, &a.weights, a.valid.as_slice()))
        .collect();
    let pce = if items.is_empty() {
        0.0
    } else {
        let (est, valid) = weighted_average(&items)?;
        let mut ws = corr.workspace();
        match corr.surface(&est, Some(&valid), &mut ws) {
            Ok(s) => s.pce(ex).pce,
            Err(Error::ZeroVariance) => 0.0,
            Err(e) => return Err(e),
        }
    };
    Ok(StbLite {
        weakly_stabilized: pce >= cfg.stb_lite_threshold,
        pce,
        frames: frames_out,
    })
}

/// Classifies a video as unstabilized, weakly or strongly stabilized.
pub fn triage(frames: &[Frame], reference: &Fingerprint, cfg: &PipelineConfig) -> Result<TriageReport> {
    let res = residuals(frames, cfg)?;
    triage_with(frames, &res, reference, cfg)
}

/// Label for the check scores; `chk_pce` is `None` when the stabilization
/// check was skipped.
pub fn classify(chk_pce: Option<f64>, lite_pce: f64, cfg: &PipelineConfig) -> Triage {
    match chk_pce {
        Some(p) if p >= cfg.stb_chk_threshold => Triage::Unstabilized,
        _ if lite_pce >= cfg.stb_lite_threshold => Triage::WeaklyStabilized,
        _ => Triage::StronglyStabilized,
    }
}

pub(crate) fn triage_with(
    frames: &[Frame],
    res: &[NoiseResidual],
    reference: &Fingerprint,
    cfg: &PipelineConfig,
) -> Result<TriageReport> {
    if frames.is_empty() {
        return Err(Error::TooFewFrames { need: 1, got: 0 });
    }
    let skipped = frames.len() < STB_CHK_MIN_FRAMES;
    let chk = if skipped {
        None
    } else {
        Some(stb_chk_with(frames, res, cfg)?)
    };
    if chk.is_some_and(|c| !c.stabilized) {
        return Ok(TriageReport {
            label: Triage::Unstabilized,
            stb_chk: chk,
            stb_chk_skipped: false,
            stb_lite: None,
            forced: false,
        });
    }
    let lite = stb_lite_with(frames, res, reference, cfg)?;
    Ok(TriageReport {
        label: classify(chk.map(|c| c.pce), lite.pce, cfg),
        stb_chk: chk,
        stb_chk_skipped: skipped,
        stb_lite: Some(lite),
        forced: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Homography;
    use crate::synth::{reference_fingerprint, render_frame, sub_seed, textured_scene, transform_frame, SyntheticSensor};

    fn cfg() -> PipelineConfig {
        let mut c = PipelineConfig::default();
        c.search.shift_range = 20;
        c
    }

    fn video(sensor: &SyntheticSensor, n: usize, seed: u64, t: impl Fn(usize) -> Option<Homography>) -> Vec<Frame> {
        (0..n)
            .map(|i| {
                let scene = textured_scene(sensor.width(), sensor.height(), sub_seed(seed, i as u64));
                let f = render_frame(&scene, sensor, 2.0, sub_seed(seed, 1000 + i as u64), i).unwrap();
                match t(i) {
                    Some(h) => transform_frame(&f, &h).unwrap(),
                    None => f,
                }
            })
            .collect()
    }

    #[test]
    fn too_few_frames_for_stb_chk() {
        let s = SyntheticSensor::new(64, 64, 0.05, 1);
        let v = video(&s, 5, 1, |_| None);
        assert!(matches!(stb_chk(&v, &cfg()), Err(Error::TooFewFrames { need: 6, got: 5 })));
    }

    #[test]
    fn aligned_video_is_unstabilized() {
        let s = SyntheticSensor::new(96, 96, 0.05, 2);
        let v = video(&s, 6, 2, |_| None);
        let r = stb_chk(&v, &cfg()).unwrap();
        assert!(r.pce > 60.0 && !r.stabilized, "{r:?}");
    }

    #[test]
    fn randomly_moved_frames_are_stabilized() {
        let s = SyntheticSensor::new(96, 96, 0.05, 3);
        let v = video(&s, 6, 3, |i| {
            Some(Homography::similarity((48.0, 48.0), (i as f64 - 2.5) * 1.7, 1.0 + 0.02 * i as f64))
        });
        let r = stb_chk(&v, &cfg()).unwrap();
        assert!(r.stabilized, "{r:?}");
    }

    #[test]
    fn stb_chk_threshold_is_inclusive() {
        let s = SyntheticSensor::new(96, 96, 0.05, 2);
        let v = video(&s, 6, 2, |_| None);
        let pce = stb_chk(&v, &cfg()).unwrap().pce;
        let at = PipelineConfig {
            stb_chk_threshold: pce,
            ..cfg()
        };
        assert!(!stb_chk(&v, &at).unwrap().stabilized);
    }

    #[test]
    fn global_rotation_is_recovered() {
        let (w, h) = (128, 128);
        let s = SyntheticSensor::new(w, h, 0.05, 4);
        let reference = reference_fingerprint(&s, 12, 2.0, 3.0, 40).unwrap();
        let c = (63.5, 63.5);
        let t = Homography::translation(12.0, -9.0).compose(&Homography::similarity(c, 0.6, 1.0));
        let v = video(&s, 3, 4, |_| Some(t));
        let r = stb_lite(&v, &reference, &cfg()).unwrap();
        assert!(r.weakly_stabilized, "{r:?}");
        for f in &r.frames {
            assert!((f.rotation_deg - 0.6).abs() <= 0.1 + 1e-9, "{f:?}");
        }
    }

    #[test]
    fn no_accepted_frames_gives_zero() {
        let s = SyntheticSensor::new(64, 64, 0.05, 5);
        let other = SyntheticSensor::new(64, 64, 0.05, 6);
        let reference = reference_fingerprint(&other, 6, 2.0, 3.0, 41).unwrap();
        let v = video(&s, 2, 5, |_| None);
        let r = stb_lite(&v, &reference, &cfg()).unwrap();
        assert!(r.frames.iter().all(|f| !f.accepted));
        assert_eq!(r.pce, 0.0);
        assert!(!r.weakly_stabilized);
    }
}
