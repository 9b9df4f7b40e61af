//! Brute-force reference implementations used to cross-check the fast paths.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::{BlockGeometry, Corner, CornerWarp, Homography};
use crate::prnu::correlation::CorrSurface;
use crate::search::{rank_order, ScoredTransform, WarpScorer};

fn normalized(x: &Field, valid: Option<&[bool]>) -> Result<Vec<f64>> {
    let keep = |i: usize| valid.is_none_or(|m| m[i]);
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, v) in x.as_slice().iter().enumerate() {
        if keep(i) {
            sum += v;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::ZeroVariance);
    }
    let mean = sum / n as f64;
    let c: Vec<f64> = x
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, v)| if keep(i) { v - mean } else { 0.0 })
        .collect();
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(c.into_iter().map(|v| v / norm).collect())
}

/// Double-loop normalized cross-correlation with the same shift convention
/// and ranges as the FFT implementation.
pub fn direct_ncc_surface(x: &Field, valid: Option<&[bool]>, y: &Field, max_shift: usize) -> Result<CorrSurface> {
    direct_ncc_surface_masked(x, valid, y, None, max_shift)
}

/// As [`direct_ncc_surface`], with an optional validity mask on `y` as well.
pub fn direct_ncc_surface_masked(
    x: &Field,
    x_valid: Option<&[bool]>,
    y: &Field,
    y_valid: Option<&[bool]>,
    max_shift: usize,
) -> Result<CorrSurface> {
    let xn = normalized(x, x_valid)?;
    let yn = normalized(y, y_valid)?;
    let (bw, bh) = x.dims();
    let (rw, rh) = y.dims();
    let m = max_shift as i64;
    if (rw, rh) == (bw, bh) {
        let axis = |n: usize| {
            if 2 * max_shift + 1 >= n {
                (-((n / 2) as i64), n, Some(n))
            } else {
                (-m, 2 * max_shift + 1, None)
            }
        };
        let (mx, ow, wx) = axis(bw);
        let (my, oh, wy) = axis(bh);
        let values = Field::from_fn(ow, oh, |ix, iy| {
            let (sx, sy) = (mx + ix as i64, my + iy as i64);
            let mut acc = 0.0;
            for py in 0..bh {
                let qy = (py as i64 - sy).rem_euclid(bh as i64) as usize;
                for px in 0..bw {
                    let qx = (px as i64 - sx).rem_euclid(bw as i64) as usize;
                    acc += xn[py * bw + px] * yn[qy * bw + qx];
                }
            }
            acc
        });
        Ok(CorrSurface::from_parts(values, mx, my, wx, wy))
    } else if rw == bw + 2 * max_shift && rh == bh + 2 * max_shift {
        let scale = ((rw * rh) as f64 / (bw * bh) as f64).sqrt();
        let n = 2 * max_shift + 1;
        let values = Field::from_fn(n, n, |ix, iy| {
            let (sx, sy) = (ix as i64 - m, iy as i64 - m);
            let mut acc = 0.0;
            for py in 0..bh {
                let qy = (m + py as i64 - sy) as usize;
                for px in 0..bw {
                    let qx = (m + px as i64 - sx) as usize;
                    acc += xn[py * bw + px] * yn[qy * rw + qx];
                }
            }
            acc * scale
        });
        Ok(CorrSurface::from_parts(values, -m, -m, None, None))
    } else {
        Err(Error::DimensionMismatch {
            expected_width: bw + 2 * max_shift,
            expected_height: bh + 2 * max_shift,
            width: rw,
            height: rh,
        })
    }
}

/// Homography through four correspondences via the closed-form
/// square-to-quadrilateral construction, independent of the linear solve
/// used in production.
pub fn homography_square_to_quad(src: &[[f64; 2]; 4], dst: &[[f64; 2]; 4]) -> Result<Homography> {
    let unit_to = |q: &[[f64; 2]; 4]| -> Result<[[f64; 3]; 3]> {
        // Maps (0,0),(1,0),(1,1),(0,1) onto q[0..4].
        let [x0, y0] = q[0];
        let [x1, y1] = q[1];
        let [x2, y2] = q[2];
        let [x3, y3] = q[3];
        let sx = x0 - x1 + x2 - x3;
        let sy = y0 - y1 + y2 - y3;
        let (dx1, dy1) = (x1 - x2, y1 - y2);
        let (dx2, dy2) = (x3 - x2, y3 - y2);
        let den = dx1 * dy2 - dx2 * dy1;
        if den == 0.0 {
            return Err(Error::DegenerateWarp);
        }
        let g = (sx * dy2 - dx2 * sy) / den;
        let h = (dx1 * sy - sx * dy1) / den;
        Ok([
            [x1 - x0 + g * x1, x3 - x0 + h * x3, x0],
            [y1 - y0 + g * y1, y3 - y0 + h * y3, y0],
            [g, h, 1.0],
        ])
    };
    let a = Homography::from_matrix(unit_to(src)?)?;
    let b = Homography::from_matrix(unit_to(dst)?)?;
    Ok(b.compose(&a.inverse()?))
}

/// Every warp with components in `±window` on the free components.
fn enumerate(window: i32, fixed: Option<Corner>) -> Vec<CornerWarp> {
    let free: Vec<usize> = (0..8).filter(|c| fixed.is_none_or(|k| c / 2 != k.index())).collect();
    let side = (2 * window + 1) as usize;
    let total = side.pow(free.len() as u32);
    (0..total)
        .map(|mut code| {
            let mut c = [0i32; 8];
            for &comp in &free {
                c[comp] = (code % side) as i32 - window;
                code /= side;
            }
            CornerWarp::from_components(c)
        })
        .collect()
}

/// Exhaustive argmax over all warps within `±window` (all four corners when
/// `fixed` is `None`, otherwise with that corner pinned). Limited to
/// `window <= 1` for four free corners and `window <= 3` with a pinned corner.
pub fn exhaustive_small_search(
    block: &Field,
    reference: &Field,
    geom: &BlockGeometry,
    window: i32,
    fixed: Option<Corner>,
    shift_range: usize,
    exclude_radius: usize,
) -> Result<ScoredTransform> {
    let limit = if fixed.is_some() { 3 } else { 1 };
    if !(0..=limit).contains(&window) {
        return Err(Error::WindowTooLarge {
            window: window.max(0) as usize,
            limit: limit as usize,
        });
    }
    let scorer = WarpScorer::new(block, reference, *geom, shift_range, exclude_radius)?;
    let warps = enumerate(window, fixed);
    let scored = crate::search::score_candidates(&scorer, &warps)?;
    scored
        .into_iter()
        .flatten()
        .min_by(rank_order)
        .ok_or(Error::AllCandidatesDegenerate)
}
