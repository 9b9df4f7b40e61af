use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::{corners_to_homography, resample_nn_into, BlockGeometry, CornerWarp, Warped};
use crate::prnu::correlation::{CorrSurface, Correlator, Workspace};
use crate::search::ScoredTransform;

/// Scores corner warps of one residual block against a reference pattern.
pub struct WarpScorer<'a> {
    reference: &'a Field,
    geom: BlockGeometry,
    shift_range: usize,
    exclude_radius: usize,
    window_origin: (i64, i64),
    window_size: usize,
    correlator: Correlator,
}

pub struct ScorerWorkspace {
    window: Field,
    valid: Vec<bool>,
    corr: Workspace,
}

/// Checks that `reference` covers the block plus `margin` on every side.
pub(crate) fn check_coverage(reference: &Field, geom: &BlockGeometry, margin: usize) -> Result<()> {
    let (x0, y0) = (geom.block_origin.0 as i64, geom.block_origin.1 as i64);
    let (m, s) = (margin as i64, geom.block_size as i64);
    let (lx, ly, hx, hy) = (x0 - m, y0 - m, x0 + s + m, y0 + s + m);
    if lx < 0 || ly < 0 || hx > reference.width() as i64 || hy > reference.height() as i64 {
        return Err(Error::ReferenceTooSmall {
            ref_width: reference.width(),
            ref_height: reference.height(),
            x0: lx,
            y0: ly,
            x1: hx,
            y1: hy,
        });
    }
    Ok(())
}

impl<'a> WarpScorer<'a> {
    /// `block` is the residual at `geom` (block-sized); `reference` is the
    /// full-frame fingerprint in frame coordinates.
    pub fn new(
        block: &Field,
        reference: &'a Field,
        geom: BlockGeometry,
        shift_range: usize,
        exclude_radius: usize,
    ) -> Result<Self> {
        if block.dims() != (geom.block_size, geom.block_size) {
            return Err(Error::DimensionMismatch {
                expected_width: geom.block_size,
                expected_height: geom.block_size,
                width: block.width(),
                height: block.height(),
            });
        }
        check_coverage(reference, &geom, shift_range)?;
        let window_size = geom.block_size + 2 * shift_range;
        let correlator = Correlator::with_fixed_block(block, window_size, window_size, shift_range)?;
        Ok(Self {
            reference,
            geom,
            shift_range,
            exclude_radius,
            window_origin: (
                geom.block_origin.0 as i64 - shift_range as i64,
                geom.block_origin.1 as i64 - shift_range as i64,
            ),
            window_size,
            correlator,
        })
    }

    pub fn geometry(&self) -> &BlockGeometry {
        &self.geom
    }

    pub fn shift_range(&self) -> usize {
        self.shift_range
    }

    pub fn workspace(&self) -> ScorerWorkspace {
        ScorerWorkspace {
            window: Field::zeros(self.window_size, self.window_size),
            valid: vec![false; self.window_size * self.window_size],
            corr: self.correlator.workspace(),
        }
    }

    fn fill_window(&self, warp: &CornerWarp, ws: &mut ScorerWorkspace) -> Result<()> {
        let h = corners_to_homography(warp, &self.geom)?;
        let inv = h.inverse()?;
        let n = self.window_size;
        resample_nn_into(
            self.reference,
            (0, 0),
            &inv,
            self.window_origin,
            ws.window.as_mut_slice(),
            &mut ws.valid,
            n,
            n,
        );
        Ok(())
    }

    /// Reference window around the block, warped by `warp`. Its origin is
    /// the block origin minus the shift range.
    pub fn warped_window(&self, warp: &CornerWarp) -> Result<Warped> {
        let mut ws = self.workspace();
        self.fill_window(warp, &mut ws)?;
        Ok(Warped {
            values: ws.window,
            valid: ws.valid,
        })
    }

    /// Full correlation surface of the block against the warped reference.
    pub fn surface(&self, warp: &CornerWarp, ws: &mut ScorerWorkspace) -> Result<CorrSurface> {
        self.fill_window(warp, ws)?;
        let ScorerWorkspace { window, valid, corr } = ws;
        self.correlator.surface(window, Some(valid), corr)
    }

    /// Best shift and PCE for a warp. Degenerate warps return `Ok(None)`.
    pub fn score(&self, warp: &CornerWarp, ws: &mut ScorerWorkspace) -> Result<Option<ScoredTransform>> {
        let surface = match self.surface(warp, ws) {
            Ok(s) => s,
            Err(Error::DegenerateWarp) | Err(Error::Singular(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let r = surface.pce(self.exclude_radius);
        Ok(Some(ScoredTransform {
            warp: *warp,
            shift: r.peak_xy,
            pce: r.pce,
            peak_corr: r.peak_corr,
        }))
    }
}
