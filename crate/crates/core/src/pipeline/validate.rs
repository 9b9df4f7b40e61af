use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::{corners_to_homography, resample_nn, BlockGeometry};
use crate::pipeline::ValidationParams;
use crate::prnu::correlation::Correlator;
use crate::prnu::NoiseResidual;
use crate::search::ScoredTransform;

/// Centered `size x size` block of a residual and its location.
pub fn crop_center(residual: &NoiseResidual, size: usize) -> Result<(Field, BlockGeometry)> {
    let geom = BlockGeometry::centered(residual.width(), residual.height(), size)?;
    let block = residual
        .values
        .crop(geom.block_origin.0, geom.block_origin.1, size, size)?;
    Ok((block, geom))
}

/// The four non-overlapping quadrants of a block with their offsets inside
/// it, ordered top-left, top-right, bottom-left, bottom-right.
pub fn sub_blocks(block: &Field) -> Result<[((usize, usize), Field); 4]> {
    let (hw, hh) = (block.width() / 2, block.height() / 2);
    let q = |x: usize, y: usize| -> Result<((usize, usize), Field)> { Ok(((x, y), block.crop(x, y, hw, hh)?)) };
    Ok([q(0, 0)?, q(hw, 0)?, q(0, hh)?, q(hw, hh)?])
}

/// Validation outcome of one scored transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformCheck {
    pub transform: ScoredTransform,
    pub validated: bool,
    pub sub_pces: [f64; 4],
}

/// Search and validation results for one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameVerdict {
    pub frame_index: usize,
    pub top_k: Vec<ScoredTransform>,
    pub validated: Vec<bool>,
    pub sub_pces: Vec<[f64; 4]>,
    pub transforms_evaluated: u64,
    pub unique_evaluations: u64,
    /// The residual carried no usable signal; the frame was not searched.
    pub low_information: bool,
}

impl FrameVerdict {
    pub fn eliminated(&self) -> bool {
        !self.validated.iter().any(|v| *v)
    }

    pub fn best_pce(&self) -> f64 {
        self.top_k.first().map_or(0.0, |t| t.pce)
    }
}

/// Sub-block PCEs of a transform at its already-found shift, and the
/// validation verdict. `block` is the residual at `geom`; `reference` is the
/// full-frame fingerprint.
pub fn validate_transform(
    block: &Field,
    t: &ScoredTransform,
    reference: &Field,
    geom: &BlockGeometry,
    params: &ValidationParams,
    shift_range: usize,
    exclude_radius: usize,
) -> Result<TransformCheck> {
    let m = shift_range;
    let h = corners_to_homography(&t.warp, geom)?;
    let n = geom.block_size + 2 * m;
    let origin = (geom.block_origin.0 as i64 - m as i64, geom.block_origin.1 as i64 - m as i64);
    let window = resample_nn(reference, (0, 0), &h.inverse()?, origin, n, n);

    let mut sub_pces = [0.0; 4];
    for (slot, ((ox, oy), sub)) in sub_pces.iter_mut().zip(sub_blocks(block)?) {
        let (sw, sh) = (sub.width() + 2 * m, sub.height() + 2 * m);
        let win = window.values.crop(ox, oy, sw, sh)?;
        let valid: Vec<bool> = (0..sh)
            .flat_map(|y| {
                let row = (oy + y) * n + ox;
                window.valid[row..row + sw].iter().copied()
            })
            .collect();
        let corr = match Correlator::with_fixed_block(&sub, sw, sh, m) {
            Ok(c) => c,
            Err(Error::ZeroVariance) => continue,
            Err(e) => return Err(e),
        };
        let mut ws = corr.workspace();
        match corr.surface(&win, Some(&valid), &mut ws) {
            Ok(s) => *slot = s.pce_at(t.shift, exclude_radius).unwrap_or(0.0),
            Err(Error::ZeroVariance) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(TransformCheck {
        transform: *t,
        validated: params.accepts(t.pce, &sub_pces),
        sub_pces,
    })
}
