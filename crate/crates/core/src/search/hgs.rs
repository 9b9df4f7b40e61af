use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::{BlockGeometry, CornerWarp};
use crate::search::scorer::WarpScorer;
use crate::search::{rank_order, LevelTrace, ScoredTransform, SearchConfig, SearchTrace, Variant};

/// Full hierarchical grid search (all four corners free).
pub fn hgs_search(
    block: &Field,
    reference: &Field,
    geom: &BlockGeometry,
    cfg: &SearchConfig,
) -> Result<(Vec<ScoredTransform>, SearchTrace)> {
    if cfg.variant != Variant::Full {
        return Err(Error::InvalidConfig("hgs_search expects the full variant".into()));
    }
    search(block, reference, geom, cfg)
}

/// Hierarchical grid search with one corner pinned at zero displacement.
pub fn constrained_hgs_search(
    block: &Field,
    reference: &Field,
    geom: &BlockGeometry,
    cfg: &SearchConfig,
) -> Result<(Vec<ScoredTransform>, SearchTrace)> {
    if cfg.variant != Variant::Constrained {
        return Err(Error::InvalidConfig("constrained_hgs_search expects the constrained variant".into()));
    }
    search(block, reference, geom, cfg)
}

/// Runs the search variant selected by `cfg`. Scoring runs on the current
/// rayon pool; results do not depend on its size.
pub fn search(
    block: &Field,
    reference: &Field,
    geom: &BlockGeometry,
    cfg: &SearchConfig,
) -> Result<(Vec<ScoredTransform>, SearchTrace)> {
    cfg.validate()?;
    let scorer = WarpScorer::new(block, reference, *geom, cfg.shift_range, cfg.exclude_radius)?;
    run(&scorer, cfg)
}

/// Offsets in `{-step, 0, step}` over the free components, in odometer order.
fn lattice(step: i32, free: &[usize]) -> Vec<CornerWarp> {
    let n = 3usize.pow(free.len() as u32);
    (0..n)
        .map(|mut code| {
            let mut c = [0i32; 8];
            for &comp in free {
                c[comp] = (code % 3) as i32 * step - step;
                code /= 3;
            }
            CornerWarp::from_components(c)
        })
        .collect()
}

pub(crate) fn free_components(cfg: &SearchConfig) -> Vec<usize> {
    match cfg.variant {
        Variant::Full => (0..8).collect(),
        Variant::Constrained => {
            let k = cfg.fixed_corner.index();
            (0..8).filter(|&c| c / 2 != k).collect()
        }
    }
}

pub fn score_candidates(scorer: &WarpScorer, warps: &[CornerWarp]) -> Result<Vec<Option<ScoredTransform>>> {
    warps
        .par_iter()
        .map_init(|| scorer.workspace(), |ws, w| scorer.score(w, ws))
        .collect()
}

fn run(scorer: &WarpScorer, cfg: &SearchConfig) -> Result<(Vec<ScoredTransform>, SearchTrace)> {
    let start = Instant::now();
    let free = free_components(cfg);
    let mut memo: HashMap<CornerWarp, Option<ScoredTransform>> = HashMap::new();
    let mut parents = vec![CornerWarp::IDENTITY];
    let mut levels = Vec::with_capacity(cfg.level_steps.len());
    let mut transforms_evaluated = 0u64;
    let mut ranked: Vec<ScoredTransform> = Vec::new();

    for (l, &step) in cfg.level_steps.iter().enumerate() {
        let level_start = Instant::now();
        let entering = parents.len();
        let offsets = lattice(step, &free);
        let mut children = BTreeSet::new();
        for p in &parents {
            for o in &offsets {
                children.insert(p.add(o));
            }
        }
        let applied = (parents.len() * offsets.len()) as u64;
        transforms_evaluated += applied;

        let fresh: Vec<CornerWarp> = children.iter().filter(|w| !memo.contains_key(*w)).copied().collect();
        let scores = score_candidates(scorer, &fresh)?;
        let degenerate = scores.iter().filter(|s| s.is_none()).count() as u64;
        for (w, s) in fresh.iter().zip(scores) {
            memo.insert(*w, s);
        }

        ranked = children.iter().filter_map(|w| memo[w]).collect();
        if ranked.is_empty() {
            return Err(Error::AllCandidatesDegenerate);
        }
        ranked.sort_by(rank_order);
        let keep = cfg.candidates_per_level.get(l + 1).copied().unwrap_or(cfg.top_k);
        ranked.truncate(keep);
        parents = ranked.iter().map(|t| t.warp).collect();

        levels.push(LevelTrace {
            step,
            parents: entering,
            transforms_applied: applied,
            newly_scored: fresh.len() as u64,
            degenerate_skipped: degenerate,
            retained: ranked.clone(),
            elapsed_ms: cfg.record_timings.then(|| level_start.elapsed().as_secs_f64() * 1e3),
        });
    }
    let trace = SearchTrace {
        config: cfg.clone(),
        transforms_evaluated,
        unique_evaluations: memo.len() as u64,
        per_level_candidates: levels,
        elapsed_ms: cfg.record_timings.then(|| start.elapsed().as_secs_f64() * 1e3),
    };
    Ok((ranked, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Corner;

    #[test]
    fn lattice_covers_all_combinations() {
        let free: Vec<usize> = (0..8).collect();
        let l = lattice(4, &free);
        assert_eq!(l.len(), 6561);
        let set: BTreeSet<_> = l.iter().collect();
        assert_eq!(set.len(), 6561);
        assert!(l.iter().all(|w| w.components().iter().all(|c| [-4, 0, 4].contains(c))));
    }

    #[test]
    fn constrained_lattice_pins_the_corner() {
        let cfg = SearchConfig {
            fixed_corner: Corner::C,
            ..SearchConfig::constrained()
        };
        let free = free_components(&cfg);
        assert_eq!(free, vec![0, 1, 2, 3, 6, 7]);
        let l = lattice(2, &free);
        assert_eq!(l.len(), 729);
        assert!(l.iter().all(|w| w.d[2] == [0, 0]));
    }

    #[test]
    fn lattice_sumset_spans_window() {
        let mut reach = BTreeSet::new();
        for a in [-4, 0, 4] {
            for b in [-2, 0, 2] {
                for c in [-1, 0, 1] {
                    reach.insert(a + b + c);
                }
            }
        }
        assert_eq!(reach, (-7..=7).collect());
    }

    #[test]
    fn closed_form_counts() {
        assert_eq!(SearchConfig::default().expected_evaluations(), 72_171);
        assert_eq!(SearchConfig::constrained().expected_evaluations(), 8_019);
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::default().validate().is_ok());
        let bad = SearchConfig {
            level_steps: vec![2, 2, 1],
            ..SearchConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SearchConfig {
            candidates_per_level: vec![2, 5, 5],
            ..SearchConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SearchConfig {
            candidates_per_level: vec![1, 5],
            ..SearchConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
