//! Validation-parameter sweeps and ROC tables over labeled runs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{FrameVerdict, ValidationParams, VerifyReport};

pub const PCE_VLD_RANGE: (u32, u32) = (0, 40);
pub const N_SUB_RANGE: (usize, usize) = (0, 4);
pub const PCE_SUB_RANGE: (u32, u32) = (0, 5);

/// Most conservative point of the sweep grid.
pub const CONSERVATIVE: ValidationParams = ValidationParams {
    pce_vld: 40.0,
    n_sub: 4,
    pce_sub: 5.0,
};

/// The scored transforms of one frame search, labeled by whether the frame
/// came from the reference camera.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledRun {
    pub matched: bool,
    /// `(pce, sub-block PCEs)` per transform.
    pub transforms: Vec<(f64, [f64; 4])>,
}

impl LabeledRun {
    pub fn from_verdict(v: &FrameVerdict, matched: bool) -> Self {
        Self {
            matched,
            transforms: v.top_k.iter().zip(&v.sub_pces).map(|(t, s)| (t.pce, *s)).collect(),
        }
    }

    /// A run validates when any of its transforms passes.
    pub fn validates(&self, p: &ValidationParams) -> bool {
        self.transforms.iter().any(|(pce, subs)| p.accepts(*pce, subs))
    }
}

/// All frame runs of a verification report.
pub fn labeled_runs(report: &VerifyReport, matched: bool) -> Vec<LabeledRun> {
    report.frames.iter().map(|v| LabeledRun::from_verdict(v, matched)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub params: ValidationParams,
    /// No grid point avoided mismatched validations; `params` is the
    /// conservative corner.
    pub flagged: bool,
    pub matched_validated: usize,
    pub matched_total: usize,
    pub mismatched_validated: usize,
    pub mismatched_total: usize,
    pub grid_points: usize,
}

/// Every point of the integer sweep grid, in increasing order.
pub fn sweep_grid() -> Vec<ValidationParams> {
    let mut out = Vec::new();
    for v in PCE_VLD_RANGE.0..=PCE_VLD_RANGE.1 {
        for n in N_SUB_RANGE.0..=N_SUB_RANGE.1 {
            for s in PCE_SUB_RANGE.0..=PCE_SUB_RANGE.1 {
                out.push(ValidationParams {
                    pce_vld: v as f64,
                    n_sub: n,
                    pce_sub: s as f64,
                });
            }
        }
    }
    out
}

/// Grid point maximizing matched validations with zero mismatched ones.
/// Ties go to larger `pce_vld`, then larger `n_sub`, then larger `pce_sub`.
pub fn sweep_validation_params(runs: &[LabeledRun]) -> SweepResult {
    let grid = sweep_grid();
    let count = |p: &ValidationParams, matched: bool| runs.iter().filter(|r| r.matched == matched && r.validates(p)).count();
    let matched_total = runs.iter().filter(|r| r.matched).count();
    let mismatched_total = runs.len() - matched_total;
    let mut best: Option<(usize, ValidationParams)> = None;
    // Grid is increasing in the tie-break keys, so `>=` keeps the last tie.
    for p in &grid {
        if count(p, false) != 0 {
            continue;
        }
        let m = count(p, true);
        if best.is_none_or(|(bm, _)| m >= bm) {
            best = Some((m, *p));
        }
    }
    let (params, flagged) = match best {
        Some((_, p)) => (p, false),
        None => (CONSERVATIVE, true),
    };
    SweepResult {
        params,
        flagged,
        matched_validated: count(&params, true),
        matched_total,
        mismatched_validated: count(&params, false),
        mismatched_total,
        grid_points: grid.len(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocTable {
    pub n_matched: usize,
    pub n_mismatched: usize,
    pub points: Vec<RocPoint>,
}

impl RocTable {
    /// Highest TPR among thresholds with no false positives, preferring the
    /// lowest such threshold.
    pub fn best_at_zero_fpr(&self) -> Option<RocPoint> {
        let mut best: Option<RocPoint> = None;
        for p in self.points.iter().filter(|p| p.fpr == 0.0) {
            if best.is_none_or(|b| p.tpr > b.tpr) {
                best = Some(*p);
            }
        }
        best
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,tpr,fpr\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{}", p.threshold, p.tpr, p.fpr);
        }
        s
    }
}

/// TPR/FPR of the rule `score >= threshold` at every observed score.
pub fn roc_curve(matched: &[f64], mismatched: &[f64]) -> Result<RocTable> {
    if matched.is_empty() || mismatched.is_empty() {
        return Err(Error::Empty("ROC score set"));
    }
    if matched.iter().chain(mismatched).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ROC scores"));
    }
    let mut thresholds: Vec<f64> = matched.iter().chain(mismatched).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let rate = |set: &[f64], t: f64| set.iter().filter(|v| **v >= t).count() as f64 / set.len() as f64;
    Ok(RocTable {
        n_matched: matched.len(),
        n_mismatched: mismatched.len(),
        points: thresholds
            .into_iter()
            .map(|t| RocPoint {
                threshold: t,
                tpr: rate(matched, t),
                fpr: rate(mismatched, t),
            })
            .collect(),
    })
}

/// ROC over verification reports, scored by their decision score (videos
/// with every frame eliminated score 0).
pub fn roc_experiment(matched: &[VerifyReport], mismatched: &[VerifyReport]) -> Result<RocTable> {
    let score = |r: &VerifyReport| r.verdict.decision_score;
    roc_curve(
        &matched.iter().map(score).collect::<Vec<_>>(),
        &mismatched.iter().map(score).collect::<Vec<_>>(),
    )
}
