//! Verification of a video against a reference fingerprint: stabilization
//! triage, block search, transform validation, rank-wise aggregation and
//! the final decision.

mod aggregate;
mod triage;
mod validate;
mod verify;

pub use aggregate::{
    aggregate_and_decide, decide, weight_mask_default, weighted_average, Decision, FrameBlock, RankEstimate, VideoVerdict,
};
pub use triage::{classify, stb_chk, stb_lite, triage, StbChk, StbLite, StbLiteFrame, Triage, TriageReport};
pub use validate::{crop_center, sub_blocks, validate_transform, FrameVerdict, TransformCheck};
pub use verify::{analyze_frame, select_frames, verify, VerifyReport, REPORT_SCHEMA_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::{SearchConfig, Variant};

/// Transform validation thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationParams {
    pub pce_vld: f64,
    pub n_sub: usize,
    pub pce_sub: f64,
}

impl ValidationParams {
    /// Operating point for the full search.
    pub const FULL: ValidationParams = ValidationParams {
        pce_vld: 28.0,
        n_sub: 2,
        pce_sub: 2.0,
    };
    /// Operating point for the constrained search.
    pub const CONSTRAINED: ValidationParams = ValidationParams {
        pce_vld: 44.0,
        n_sub: 2,
        pce_sub: 2.0,
    };

    pub fn for_variant(v: Variant) -> Self {
        match v {
            Variant::Full => Self::FULL,
            Variant::Constrained => Self::CONSTRAINED,
        }
    }

    /// Validation rule: block PCE at least `pce_vld` and at least `n_sub`
    /// sub-block PCEs at or above `pce_sub`.
    pub fn accepts(&self, pce: f64, sub_pces: &[f64; 4]) -> bool {
        pce >= self.pce_vld && sub_pces.iter().filter(|&&p| p >= self.pce_sub).count() >= self.n_sub
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pce_vld >= 0.0) || !self.pce_vld.is_finite() || !self.pce_sub.is_finite() {
            return Err(Error::InvalidConfig("validation thresholds must be finite, pce_vld >= 0".into()));
        }
        if self.n_sub > 4 {
            return Err(Error::InvalidConfig("n_sub must be in 0..=4".into()));
        }
        Ok(())
    }
}

impl Default for ValidationParams {
    fn default() -> Self {
        Self::FULL
    }
}

/// Similarity search grid used to detect weak stabilization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AffineSearch {
    pub scales: Vec<f64>,
    pub max_rotation_deg: f64,
    pub rotation_step_deg: f64,
}

impl Default for AffineSearch {
    fn default() -> Self {
        Self {
            scales: vec![0.99, 1.0, 1.01],
            max_rotation_deg: 1.5,
            rotation_step_deg: 0.1,
        }
    }
}

impl AffineSearch {
    /// Rotation grid from `-max` to `+max` inclusive.
    pub fn rotations(&self) -> Vec<f64> {
        let n = (self.max_rotation_deg / self.rotation_step_deg).round() as i64;
        (-n..=n).map(|i| i as f64 * self.rotation_step_deg).collect()
    }

    /// Coarse scale scan for references derived from higher-resolution photos.
    pub fn coarse_scales() -> Vec<f64> {
        (30..=90).map(|i| i as f64 / 100.0).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub block_size: usize,
    /// Noise variance assumed by the residual denoiser (0-255 scale).
    pub denoise_strength: f64,
    pub stb_chk_threshold: f64,
    pub stb_lite_threshold: f64,
    pub stb_lite_frame_accept: f64,
    pub decision_threshold: f64,
    pub n_frames: usize,
    /// Number of rank estimates that must reach the decision threshold.
    pub min_rank_matches: usize,
    pub search: SearchConfig,
    pub validation: ValidationParams,
    pub affine_search: AffineSearch,
    /// Skip triage and run the strong pipeline directly.
    pub force_strong: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            block_size: 500,
            denoise_strength: 3.0,
            stb_chk_threshold: 60.0,
            stb_lite_threshold: 100.0,
            stb_lite_frame_accept: 38.0,
            decision_threshold: 60.0,
            n_frames: 5,
            min_rank_matches: 3,
            search: SearchConfig::default(),
            validation: ValidationParams::FULL,
            affine_search: AffineSearch::default(),
            force_strong: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        self.validation.validate()?;
        let finite = [
            self.stb_chk_threshold,
            self.stb_lite_threshold,
            self.stb_lite_frame_accept,
            self.decision_threshold,
            self.denoise_strength,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("thresholds must be finite".into()));
        }
        if self.denoise_strength <= 0.0 {
            return Err(Error::InvalidConfig("denoise_strength must be positive".into()));
        }
        if self.n_frames == 0 {
            return Err(Error::InvalidConfig("n_frames must be >= 1".into()));
        }
        if self.block_size < 4 {
            return Err(Error::InvalidConfig("block_size must be >= 4".into()));
        }
        if self.min_rank_matches == 0 || self.min_rank_matches > self.search.top_k {
            return Err(Error::InvalidConfig("min_rank_matches must be in 1..=top_k".into()));
        }
        let a = &self.affine_search;
        if a.scales.is_empty() || a.scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidConfig("affine scales must be positive".into()));
        }
        if !(a.rotation_step_deg > 0.0) || !(a.max_rotation_deg >= 0.0) {
            return Err(Error::InvalidConfig("rotation grid must have a positive step".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rule_examples() {
        let p = ValidationParams::FULL;
        assert!(p.accepts(30.0, &[3.1, 0.5, 2.4, 1.0]));
        assert!(!p.accepts(27.9, &[9.0, 9.0, 9.0, 9.0]));
        assert!(!p.accepts(50.0, &[1.9, 1.9, 1.9, 1.9]));
    }

    #[test]
    fn rotation_grid_has_31_values() {
        let r = AffineSearch::default().rotations();
        assert_eq!(r.len(), 31);
        assert!((r[0] + 1.5).abs() < 1e-12 && (r[30] - 1.5).abs() < 1e-12);
        assert!(r.contains(&0.0));
    }

    #[test]
    fn defaults_are_valid() {
        assert!(PipelineConfig::default().validate().is_ok());
        let bad = PipelineConfig {
            n_frames: 0,
            ..PipelineConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
