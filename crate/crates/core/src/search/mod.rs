//! Inverse stabilization transform search.
//!
//! A candidate transform is a corner warp `W` (homography `H`) followed by a
//! global integer shift `s`: reference content at `p` appears in the
//! stabilized frame at `H(p) + s`. Each candidate warp is scored by warping
//! the reference window around the block with `H` and correlating the fixed
//! residual block against it over all shifts in `±shift_range`; the best
//! shift and its PCE form the candidate's score.

mod hgs;
mod scorer;
mod shift;

pub use hgs::{constrained_hgs_search, hgs_search, score_candidates, search};
pub use scorer::{ScorerWorkspace, WarpScorer};
pub(crate) use scorer::check_coverage;
pub use shift::{shift_search, ShiftMatch};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{corners_to_homography, BlockGeometry, Corner, CornerWarp, Homography};
use crate::prnu::correlation::DEFAULT_EXCLUDE_RADIUS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// All four corners move independently.
    Full,
    /// One corner is pinned; the shift search supplies its translation.
    Constrained,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub level_steps: Vec<i32>,
    /// Number of parents refined at each level; the first level always starts
    /// from the identity alone.
    pub candidates_per_level: Vec<usize>,
    pub top_k: usize,
    pub shift_range: usize,
    pub variant: Variant,
    pub fixed_corner: Corner,
    pub exclude_radius: usize,
    /// Record wall-clock timings in the trace. Off by default so that traces
    /// are byte-reproducible.
    pub record_timings: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            level_steps: vec![4, 2, 1],
            candidates_per_level: vec![1, 5, 5],
            top_k: 5,
            shift_range: 50,
            variant: Variant::Full,
            fixed_corner: Corner::A,
            exclude_radius: DEFAULT_EXCLUDE_RADIUS,
            record_timings: false,
        }
    }
}

impl SearchConfig {
    pub fn constrained() -> Self {
        Self {
            variant: Variant::Constrained,
            ..Self::default()
        }
    }

    /// Per-axis reach of the lattice (sum of the steps).
    pub fn window(&self) -> i32 {
        self.level_steps.iter().sum()
    }

    /// Number of corner components the search moves.
    pub fn free_components(&self) -> u32 {
        match self.variant {
            Variant::Full => 8,
            Variant::Constrained => 6,
        }
    }

    /// Closed-form number of lattice applications when every level retains
    /// its full quota of parents.
    pub fn expected_evaluations(&self) -> u64 {
        let per_parent = 3u64.pow(self.free_components());
        self.candidates_per_level.iter().map(|&c| c as u64).sum::<u64>() * per_parent
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.level_steps.is_empty() {
            return bad("level_steps must not be empty");
        }
        if self.level_steps.iter().any(|&s| s <= 0) {
            return bad("level_steps must be positive");
        }
        if self.level_steps.windows(2).any(|w| w[1] >= w[0]) {
            return bad("level_steps must be strictly decreasing");
        }
        if self.candidates_per_level.len() != self.level_steps.len() {
            return bad("candidates_per_level needs one entry per level");
        }
        if self.candidates_per_level[0] != 1 {
            return bad("candidates_per_level[0] must be 1");
        }
        if self.candidates_per_level.contains(&0) {
            return bad("candidates_per_level entries must be >= 1");
        }
        if self.top_k == 0 {
            return bad("top_k must be >= 1");
        }
        if self.exclude_radius == 0 {
            return bad("exclude_radius must be >= 1");
        }
        Ok(())
    }
}

/// One candidate inverse transform and its score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredTransform {
    pub warp: CornerWarp,
    pub shift: (i64, i64),
    pub pce: f64,
    pub peak_corr: f64,
}

impl ScoredTransform {
    /// Full transform `translation(shift) ∘ H(warp)`.
    pub fn homography(&self, geom: &BlockGeometry) -> Result<Homography> {
        let h = corners_to_homography(&self.warp, geom)?;
        Ok(Homography::translation(self.shift.0 as f64, self.shift.1 as f64).compose(&h))
    }

    /// Total displacement of every corner, warp plus shift.
    pub fn corner_displacements(&self) -> [[i64; 2]; 4] {
        let mut out = [[0i64; 2]; 4];
        for (o, d) in out.iter_mut().zip(&self.warp.d) {
            *o = [d[0] as i64 + self.shift.0, d[1] as i64 + self.shift.1];
        }
        out
    }
}

/// Ranking order: PCE descending, then warp components, then shift.
pub fn rank_order(a: &ScoredTransform, b: &ScoredTransform) -> Ordering {
    b.pce
        .total_cmp(&a.pce)
        .then_with(|| a.warp.cmp(&b.warp))
        .then_with(|| a.shift.cmp(&b.shift))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub step: i32,
    pub parents: usize,
    /// Lattice applications at this level (`parents * 3^components`).
    pub transforms_applied: u64,
    /// Warps scored for the first time at this level.
    pub newly_scored: u64,
    pub degenerate_skipped: u64,
    pub retained: Vec<ScoredTransform>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub config: SearchConfig,
    /// Total lattice applications across levels.
    pub transforms_evaluated: u64,
    /// Distinct warps actually scored (children reachable from several
    /// parents are scored once).
    pub unique_evaluations: u64,
    pub per_level_candidates: Vec<LevelTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}
