//! Corner-vertex warps, projective matrices and nearest-neighbor resampling.
//!
//! A stabilization transform acting on a square analysis block is
//! parameterized by the integer displacement of the block's four corner
//! pixels, ordered clockwise from the top-left: A (top-left), B (top-right),
//! C (bottom-right), D (bottom-left). Coordinates are absolute frame pixel
//! coordinates `(x, y)`, origin top-left.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Corner {
    A,
    B,
    C,
    D,
}

impl Corner {
    pub const ALL: [Corner; 4] = [Corner::A, Corner::B, Corner::C, Corner::D];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Integer displacements `(dx, dy)` of the corners A, B, C, D.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CornerWarp {
    pub d: [[i32; 2]; 4],
}

impl CornerWarp {
    pub const IDENTITY: CornerWarp = CornerWarp { d: [[0; 2]; 4] };

    pub fn new(d: [[i32; 2]; 4]) -> Self {
        Self { d }
    }

    pub fn uniform(dx: i32, dy: i32) -> Self {
        Self { d: [[dx, dy]; 4] }
    }

    /// Components in `(dxA, dyA, dxB, dyB, dxC, dyC, dxD, dyD)` order.
    pub fn components(&self) -> [i32; 8] {
        let mut out = [0; 8];
        for (i, c) in self.d.iter().enumerate() {
            out[2 * i] = c[0];
            out[2 * i + 1] = c[1];
        }
        out
    }

    pub fn from_components(c: [i32; 8]) -> Self {
        Self {
            d: [[c[0], c[1]], [c[2], c[3]], [c[4], c[5]], [c[6], c[7]]],
        }
    }

    pub fn max_abs(&self) -> i32 {
        self.components().iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    pub fn within(&self, window: i32) -> bool {
        self.max_abs() <= window
    }

    pub fn add(&self, other: &CornerWarp) -> CornerWarp {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(&other.d) {
            a[0] += b[0];
            a[1] += b[1];
        }
        CornerWarp { d }
    }

    /// Warped corner positions for a block.
    pub fn targets(&self, geom: &BlockGeometry) -> [[f64; 2]; 4] {
        let src = geom.corners();
        let mut out = [[0.0; 2]; 4];
        for i in 0..4 {
            out[i] = [src[i][0] + self.d[i][0] as f64, src[i][1] + self.d[i][1] as f64];
        }
        out
    }

    /// Whether the warped quadrilateral is convex with positive area.
    pub fn is_valid(&self, geom: &BlockGeometry) -> bool {
        quad_is_convex(&self.targets(geom))
    }
}

/// Location of a square analysis block inside a frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockGeometry {
    /// Top-left pixel `(x, y)` of the block.
    pub block_origin: (usize, usize),
    pub block_size: usize,
}

impl BlockGeometry {
    pub fn new(block_origin: (usize, usize), block_size: usize) -> Self {
        Self {
            block_origin,
            block_size,
        }
    }

    /// Centered block (floor division for odd margins).
    pub fn centered(frame_w: usize, frame_h: usize, block_size: usize) -> Result<Self> {
        if frame_w < block_size || frame_h < block_size || block_size < 2 {
            return Err(Error::FrameTooSmall {
                width: frame_w,
                height: frame_h,
                block: block_size,
            });
        }
        Ok(Self::new(((frame_w - block_size) / 2, (frame_h - block_size) / 2), block_size))
    }

    pub fn fits(&self, frame_w: usize, frame_h: usize) -> bool {
        self.block_origin.0 + self.block_size <= frame_w && self.block_origin.1 + self.block_size <= frame_h
    }

    /// Corner pixel centers A, B, C, D.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (x0, y0) = (self.block_origin.0 as f64, self.block_origin.1 as f64);
        let e = (self.block_size - 1) as f64;
        [[x0, y0], [x0 + e, y0], [x0 + e, y0 + e], [x0, y0 + e]]
    }
}

fn quad_is_convex(p: &[[f64; 2]; 4]) -> bool {
    let mut sign = 0.0;
    for i in 0..4 {
        let a = p[i];
        let b = p[(i + 1) % 4];
        let c = p[(i + 2) % 4];
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        if cross == 0.0 {
            return false;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return false;
        }
    }
    // Clockwise in image coordinates (y down) gives positive cross products.
    sign > 0.0
}

/// 3x3 projective matrix acting on column vectors `(x, y, 1)`, normalized so
/// that `m[2][2] == 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Homography {
    pub m: [[f64; 3]; 3],
}

impl Homography {
    pub const IDENTITY: Homography = Homography {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self> {
        let s = m[2][2];
        if s == 0.0 || !s.is_finite() {
            return Err(Error::Singular(0.0));
        }
        let mut n = m;
        for row in n.iter_mut() {
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        let h = Homography { m: n };
        let det = h.det();
        if det.abs() <= 1e-9 || !det.is_finite() {
            return Err(Error::Singular(det));
        }
        Ok(h)
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Homography {
            m: [[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]],
        }
    }

    /// Rotation by `degrees` and isotropic scaling about `center`.
    pub fn similarity(center: (f64, f64), degrees: f64, scale: f64) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        let (a, b) = (scale * c, scale * s);
        let (cx, cy) = center;
        Homography {
            m: [
                [a, -b, cx - a * cx + b * cy],
                [b, a, cy - b * cx - a * cy],
                [0.0, 0.0, 1.0],
            ],
        }
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.m;
        let w = m[2][0] * x + m[2][1] * y + m[2][2];
        (
            (m[0][0] * x + m[0][1] * y + m[0][2]) / w,
            (m[1][0] * x + m[1][1] * y + m[1][2]) / w,
        )
    }

    pub fn inverse(&self) -> Result<Homography> {
        let m = &self.m;
        let det = self.det();
        if det.abs() <= 1e-9 || !det.is_finite() {
            return Err(Error::Singular(det));
        }
        let adj = [
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ];
        Homography::from_matrix(adj)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Homography) -> Homography {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        let s = out[2][2];
        for row in out.iter_mut() {
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        Homography { m: out }
    }
}

/// Solves the 8x8 point-correspondence system for the homography mapping
/// `src[i]` to `dst[i]`, with Hartley-style conditioning of both point sets.
pub fn homography_from_points(src: &[[f64; 2]; 4], dst: &[[f64; 2]; 4]) -> Result<Homography> {
    let (ns, ts) = condition(src);
    let (nd, td) = condition(dst);

    let mut a = [[0.0f64; 9]; 8];
    for i in 0..4 {
        let [x, y] = ns[i];
        let [u, v] = nd[i];
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, u];
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, v];
    }
    let h = solve8(a).ok_or(Error::DegenerateWarp)?;
    let hn = Homography {
        m: [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]],
    };
    // H = Td^-1 * Hn * Ts
    let td_inv = td.inverse()?;
    Homography::from_matrix(td_inv.compose(&hn).compose(&ts).m)
}

/// Similarity that moves the centroid to the origin and the mean distance to sqrt(2).
fn condition(p: &[[f64; 2]; 4]) -> ([[f64; 2]; 4], Homography) {
    let cx = p.iter().map(|q| q[0]).sum::<f64>() / 4.0;
    let cy = p.iter().map(|q| q[1]).sum::<f64>() / 4.0;
    let mean_d = p.iter().map(|q| ((q[0] - cx).powi(2) + (q[1] - cy).powi(2)).sqrt()).sum::<f64>() / 4.0;
    let s = if mean_d > 0.0 { std::f64::consts::SQRT_2 / mean_d } else { 1.0 };
    let mut out = [[0.0; 2]; 4];
    for (o, q) in out.iter_mut().zip(p) {
        *o = [(q[0] - cx) * s, (q[1] - cy) * s];
    }
    let t = Homography {
        m: [[s, 0.0, -s * cx], [0.0, s, -s * cy], [0.0, 0.0, 1.0]],
    };
    (out, t)
}

/// Gaussian elimination with partial pivoting on an augmented 8x9 system.
fn solve8(mut a: [[f64; 9]; 8]) -> Option<[f64; 8]> {
    for col in 0..8 {
        let piv = (col..8).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        for row in col + 1..8 {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..9 {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let mut x = [0.0; 8];
    for row in (0..8).rev() {
        let mut s = a[row][8];
        for k in row + 1..8 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Homography taking each block corner to its displaced position.
pub fn corners_to_homography(warp: &CornerWarp, geom: &BlockGeometry) -> Result<Homography> {
    if !warp.is_valid(geom) {
        return Err(Error::DegenerateWarp);
    }
    if *warp == CornerWarp::IDENTITY {
        return Ok(Homography::IDENTITY);
    }
    let first = warp.d[0];
    if warp.d.iter().all(|c| *c == first) {
        return Ok(Homography::translation(first[0] as f64, first[1] as f64));
    }
    homography_from_points(&geom.corners(), &warp.targets(geom))
}

/// Nearest-neighbor resampling result with its validity mask.
#[derive(Clone, Debug)]
pub struct Warped {
    pub values: Field,
    pub valid: Vec<bool>,
}

impl Warped {
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// General nearest-neighbor sampler: for every output pixel `p` (absolute
/// coordinates, output grid starting at `out_origin`), reads `src` at
/// `round(map(p))`, where `src` starts at `src_origin`. Samples that fall
/// outside `src` are zero and marked invalid.
pub fn resample_nn(
    src: &Field,
    src_origin: (i64, i64),
    map: &Homography,
    out_origin: (i64, i64),
    out_w: usize,
    out_h: usize,
) -> Warped {
    let mut values = Field::zeros(out_w, out_h);
    let mut valid = vec![false; out_w * out_h];
    resample_nn_into(src, src_origin, map, out_origin, values.as_mut_slice(), &mut valid, out_w, out_h);
    Warped { values, valid }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn resample_nn_into(
    src: &Field,
    src_origin: (i64, i64),
    map: &Homography,
    out_origin: (i64, i64),
    out: &mut [f64],
    valid: &mut [bool],
    out_w: usize,
    out_h: usize,
) {
    let (sw, sh) = (src.width() as i64, src.height() as i64);
    let m = &map.m;
    let data = src.as_slice();
    for oy in 0..out_h {
        let y = (out_origin.1 + oy as i64) as f64;
        let x0 = out_origin.0 as f64;
        // Row-wise incremental evaluation of the three homogeneous terms.
        let mut nx = m[0][0] * x0 + m[0][1] * y + m[0][2];
        let mut ny = m[1][0] * x0 + m[1][1] * y + m[1][2];
        let mut nw = m[2][0] * x0 + m[2][1] * y + m[2][2];
        let row = &mut out[oy * out_w..(oy + 1) * out_w];
        let vrow = &mut valid[oy * out_w..(oy + 1) * out_w];
        for ox in 0..out_w {
            let sx = (nx / nw).round() as i64 - src_origin.0;
            let sy = (ny / nw).round() as i64 - src_origin.1;
            if sx >= 0 && sy >= 0 && sx < sw && sy < sh {
                row[ox] = data[(sy * sw + sx) as usize];
                vrow[ox] = true;
            } else {
                row[ox] = 0.0;
                vrow[ox] = false;
            }
            nx += m[0][0];
            ny += m[1][0];
            nw += m[2][0];
        }
    }
}

/// Applies the warp `h` to a block-sized pattern located at `geom`:
/// `output[p] = pattern[round(h^-1 (p))]` for every block pixel `p`.
///
/// Content at `q` moves to `h(q)`; source samples outside the pattern are
/// zero and marked invalid.
pub fn inverse_warp(pattern: &Field, h: &Homography, geom: &BlockGeometry) -> Result<Warped> {
    let o = (geom.block_origin.0 as i64, geom.block_origin.1 as i64);
    Ok(resample_nn(pattern, o, &h.inverse()?, o, geom.block_size, geom.block_size))
}

/// Reverts a warp applied by [`inverse_warp`]: `output[p] = pattern[round(h(p))]`.
pub fn undo_warp(pattern: &Field, h: &Homography, geom: &BlockGeometry) -> Warped {
    let o = (geom.block_origin.0 as i64, geom.block_origin.1 as i64);
    resample_nn(pattern, o, h, o, geom.block_size, geom.block_size)
}

/// Splits a warp into a warp that keeps `fixed` in place and the integer
/// translation of that corner: `T = S ∘ T'`.
pub fn decompose_fixed_vertex_at(warp: &CornerWarp, fixed: Corner) -> (CornerWarp, (i32, i32)) {
    let [sx, sy] = warp.d[fixed.index()];
    let mut d = warp.d;
    for c in d.iter_mut() {
        c[0] -= sx;
        c[1] -= sy;
    }
    (CornerWarp { d }, (sx, sy))
}

/// Fixed-vertex decomposition about corner A.
pub fn decompose_fixed_vertex(warp: &CornerWarp) -> (CornerWarp, (i32, i32)) {
    decompose_fixed_vertex_at(warp, Corner::A)
}
