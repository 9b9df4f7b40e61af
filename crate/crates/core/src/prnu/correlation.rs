//! Normalized cross-correlation surfaces and peak-to-correlation energy.
//!
//! Two geometries are supported:
//!
//! * **circular**: residual and fingerprint have identical dimensions and the
//!   surface is the circular correlation over shifts `|s| <= max_shift`
//!   (the whole circle when `2 * max_shift + 1` covers an axis);
//! * **windowed**: the fingerprint window is the residual padded by
//!   `max_shift` on every side, the residual nominally sitting at offset
//!   `(max_shift, max_shift)`. No wrap-around occurs for any searched shift.
//!
//! Shift convention: a peak at `s` means the residual content is displaced
//! by `+s` relative to the fingerprint, i.e. `residual[p] ~ fingerprint[p - s]`.
//!
//! Both inputs are mean-removed, scaled to unit norm and rounded to `f32`
//! precision before correlating. The rounding canonicalizes the inputs so
//! that positive rescaling of either one yields bit-identical surfaces.

use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;

/// Default half-width of the square excluded around the peak (11x11).
pub const DEFAULT_EXCLUDE_RADIUS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PceResult {
    pub pce: f64,
    /// Shift `(dx, dy)` of the correlation peak.
    pub peak_xy: (i64, i64),
    pub peak_corr: f64,
    /// Mean squared correlation outside the excluded peak neighborhood.
    pub energy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Geometry {
    Circular,
    Windowed,
}

/// Correlation values indexed by shift.
#[derive(Clone, Debug)]
pub struct CorrSurface {
    values: Field,
    min_dx: i64,
    min_dy: i64,
    /// Axis period when the axis covers the whole circle, for wrap-aware
    /// neighborhood distances.
    wrap_x: Option<usize>,
    wrap_y: Option<usize>,
}

impl CorrSurface {
    pub(crate) fn from_parts(
        values: Field,
        min_dx: i64,
        min_dy: i64,
        wrap_x: Option<usize>,
        wrap_y: Option<usize>,
    ) -> Self {
        Self {
            values,
            min_dx,
            min_dy,
            wrap_x,
            wrap_y,
        }
    }

    pub fn values(&self) -> &Field {
        &self.values
    }

    pub fn shift_range_x(&self) -> (i64, i64) {
        (self.min_dx, self.min_dx + self.values.width() as i64 - 1)
    }

    pub fn shift_range_y(&self) -> (i64, i64) {
        (self.min_dy, self.min_dy + self.values.height() as i64 - 1)
    }

    /// Number of candidate shifts the surface scores.
    pub fn n_shifts(&self) -> usize {
        self.values.len()
    }

    pub fn at(&self, dx: i64, dy: i64) -> Option<f64> {
        let ix = dx - self.min_dx;
        let iy = dy - self.min_dy;
        if ix < 0 || iy < 0 || ix >= self.values.width() as i64 || iy >= self.values.height() as i64 {
            return None;
        }
        Some(self.values.get(ix as usize, iy as usize))
    }

    /// Index of the maximum signed value; ties resolve to the first in
    /// row-major (dy, dx) order.
    fn argmax(&self) -> (usize, usize) {
        let w = self.values.width();
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (i, &v) in self.values.as_slice().iter().enumerate() {
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        (best % w, best / w)
    }

    fn energy_excluding(&self, px: usize, py: usize, radius: usize) -> f64 {
        let h = self.values.height();
        let dist = |a: usize, b: usize, wrap: Option<usize>| {
            let d = a.abs_diff(b);
            match wrap {
                Some(n) => d.min(n - d),
                None => d,
            }
        };
        let mut sum = 0.0;
        let mut count = 0usize;
        for y in 0..h {
            let near_y = dist(y, py, self.wrap_y) <= radius;
            for (x, &v) in self.values.row(y).iter().enumerate() {
                if near_y && dist(x, px, self.wrap_x) <= radius {
                    continue;
                }
                sum += v * v;
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    /// PCE of the surface maximum.
    pub fn pce(&self, exclude_radius: usize) -> PceResult {
        let (px, py) = self.argmax();
        let peak = self.values.get(px, py);
        let energy = self.energy_excluding(px, py, exclude_radius);
        let pce = if energy > 0.0 { peak * peak / energy } else { 0.0 };
        PceResult {
            pce,
            peak_xy: (px as i64 + self.min_dx, py as i64 + self.min_dy),
            peak_corr: peak,
            energy,
        }
    }

    /// Signed PCE at a prescribed shift (no peak search):
    /// `sign(c) * c^2 / energy` with the neighborhood excluded around `shift`.
    pub fn pce_at(&self, shift: (i64, i64), exclude_radius: usize) -> Option<f64> {
        let c = self.at(shift.0, shift.1)?;
        let px = (shift.0 - self.min_dx) as usize;
        let py = (shift.1 - self.min_dy) as usize;
        let energy = self.energy_excluding(px, py, exclude_radius);
        Some(if energy > 0.0 { c.signum() * c * c / energy } else { 0.0 })
    }
}

#[inline]
fn canonical(v: f64) -> f64 {
    v as f32 as f64
}

/// Mean-removes `x` over the valid samples, zeroes invalid ones and scales to
/// unit norm, writing canonicalized samples into `out`.
fn prepare_into(x: &[f64], valid: Option<&[bool]>, out: &mut [f64]) -> Result<usize> {
    let (sum, n) = match valid {
        Some(m) => x
            .iter()
            .zip(m)
            .filter(|(_, &ok)| ok)
            .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1)),
        None => (x.iter().sum::<f64>(), x.len()),
    };
    if n == 0 {
        return Err(Error::ZeroVariance);
    }
    let mean = sum / n as f64;
    let mut ss = 0.0;
    for (i, (o, &v)) in out.iter_mut().zip(x).enumerate() {
        let keep = valid.is_none_or(|m| m[i]);
        let c = if keep { v - mean } else { 0.0 };
        *o = c;
        ss += c * c;
    }
    if !(ss > 0.0) || !ss.is_finite() {
        return Err(Error::ZeroVariance);
    }
    let inv = 1.0 / ss.sqrt();
    out.iter_mut().for_each(|v| *v = canonical(*v * inv));
    Ok(n)
}

/// Smallest `n' >= n` of the form `2^a 3^b 5^c`.
pub fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Reusable FFT correlator between a block and a reference window where one
/// side stays fixed across many calls. The fixed spectrum is computed once;
/// each call then costs one forward and one pruned inverse 2D real FFT.
pub struct Correlator {
    geometry: Geometry,
    block_w: usize,
    block_h: usize,
    /// Dimensions of the input passed to [`Correlator::surface`].
    moving_w: usize,
    moving_h: usize,
    moving_is_block: bool,
    nx: usize,
    ny: usize,
    min_dx: i64,
    min_dy: i64,
    out_w: usize,
    out_h: usize,
    wrap_x: Option<usize>,
    wrap_y: Option<usize>,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    /// Fixed-side spectrum, column-major (`[kx * ny + ky]`), pre-scaled by
    /// `1 / (nx * ny)` and conjugated when the fixed side is the block.
    ref_spec: Vec<Complex64>,
    /// Converts the unit-norm correlation into a correlation coefficient.
    scale: f64,
}

/// Per-worker scratch buffers for a [`Correlator`].
pub struct Workspace {
    prepared: Vec<f64>,
    row_real: Vec<f64>,
    row_spec: Vec<Complex64>,
    spec: Vec<Complex64>,
    scratch: Vec<Complex64>,
    real_scratch: Vec<Complex64>,
}

impl Correlator {
    /// Builds a correlator with a fixed reference, for `block_w x block_h` blocks.
    ///
    /// The geometry is circular when the reference has the block's
    /// dimensions and windowed when it is larger by exactly `2 * max_shift`
    /// on both axes.
    pub fn new(reference: &Field, block_w: usize, block_h: usize, max_shift: usize) -> Result<Self> {
        Self::build(reference, false, block_w, block_h, max_shift)
    }

    /// Builds a correlator with a fixed block, for reference windows of
    /// `window_w x window_h` (same geometry rules as [`Correlator::new`]).
    pub fn with_fixed_block(block: &Field, window_w: usize, window_h: usize, max_shift: usize) -> Result<Self> {
        Self::build(block, true, window_w, window_h, max_shift)
    }

    fn build(fixed: &Field, fixed_is_block: bool, moving_w: usize, moving_h: usize, max_shift: usize) -> Result<Self> {
        let (fw, fh) = fixed.dims();
        let ((bw, bh), (rw, rh)) = if fixed_is_block {
            ((fw, fh), (moving_w, moving_h))
        } else {
            ((moving_w, moving_h), (fw, fh))
        };
        let geometry = if (rw, rh) == (bw, bh) {
            Geometry::Circular
        } else if rw == bw + 2 * max_shift && rh == bh + 2 * max_shift {
            Geometry::Windowed
        } else {
            return Err(Error::DimensionMismatch {
                expected_width: bw + 2 * max_shift,
                expected_height: bh + 2 * max_shift,
                width: rw,
                height: rh,
            });
        };
        if bw == 0 || bh == 0 {
            return Err(Error::Empty("correlation block"));
        }

        let (nx, ny) = match geometry {
            Geometry::Circular => (rw, rh),
            Geometry::Windowed => (fast_len(rw), fast_len(rh)),
        };
        let m = max_shift as i64;
        let axis = |n: usize| -> (i64, usize, Option<usize>) {
            match geometry {
                Geometry::Circular if 2 * max_shift + 1 >= n => (-((n / 2) as i64), n, Some(n)),
                _ => (-m, 2 * max_shift + 1, None),
            }
        };
        let (min_dx, out_w, wrap_x) = axis(nx);
        let (min_dy, out_h, wrap_y) = axis(ny);

        let mut real_planner = RealFftPlanner::<f64>::new();
        let r2c = real_planner.plan_fft_forward(nx);
        let c2r = real_planner.plan_fft_inverse(nx);
        let mut planner = FftPlanner::<f64>::new();
        let col_fwd = planner.plan_fft_forward(ny);
        let col_inv = planner.plan_fft_inverse(ny);

        let mut me = Self {
            geometry,
            block_w: bw,
            block_h: bh,
            moving_w,
            moving_h,
            moving_is_block: !fixed_is_block,
            nx,
            ny,
            min_dx,
            min_dy,
            out_w,
            out_h,
            wrap_x,
            wrap_y,
            r2c,
            c2r,
            col_fwd,
            col_inv,
            ref_spec: Vec::new(),
            scale: ((rw * rh) as f64 / (bw * bh) as f64).sqrt(),
        };

        let mut prepared = vec![0.0; fw * fh];
        prepare_into(fixed.as_slice(), None, &mut prepared)?;
        let mut ws = me.workspace();
        let mut spec = std::mem::take(&mut ws.spec);
        me.forward(&prepared, fw, fh, &mut spec, &mut ws);
        let inv_n = 1.0 / (nx * ny) as f64;
        spec.iter_mut().for_each(|c| {
            *c *= inv_n;
            if fixed_is_block {
                *c = c.conj();
            }
        });
        me.ref_spec = spec;
        Ok(me)
    }

    pub fn block_dims(&self) -> (usize, usize) {
        (self.block_w, self.block_h)
    }

    pub fn fft_dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn workspace(&self) -> Workspace {
        let c = self.nx / 2 + 1;
        let scratch_len = self
            .col_fwd
            .get_inplace_scratch_len()
            .max(self.col_inv.get_inplace_scratch_len());
        let real_scratch_len = self.r2c.get_scratch_len().max(self.c2r.get_scratch_len());
        Workspace {
            prepared: vec![0.0; self.moving_w * self.moving_h],
            row_real: vec![0.0; self.nx],
            row_spec: vec![Complex64::new(0.0, 0.0); c],
            spec: vec![Complex64::new(0.0, 0.0); c * self.ny],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            real_scratch: vec![Complex64::new(0.0, 0.0); real_scratch_len],
        }
    }

    /// 2D forward real FFT of a `w x h` image zero-padded to `nx x ny`,
    /// leaving the column-major half spectrum in `spec`.
    fn forward(&self, img: &[f64], w: usize, h: usize, spec: &mut [Complex64], ws: &mut Workspace) {
        let c = self.nx / 2 + 1;
        let ny = self.ny;
        spec.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for y in 0..h {
            ws.row_real[..w].copy_from_slice(&img[y * w..(y + 1) * w]);
            ws.row_real[w..].iter_mut().for_each(|v| *v = 0.0);
            self.r2c
                .process_with_scratch(&mut ws.row_real, &mut ws.row_spec, &mut ws.real_scratch)
                .expect("row buffers sized by plan");
            for (kx, v) in ws.row_spec.iter().enumerate() {
                spec[kx * ny + y] = *v;
            }
        }
        debug_assert_eq!(spec.len(), c * ny);
        self.col_fwd.process_with_scratch(spec, &mut ws.scratch);
    }

    /// Correlates the moving input (a block, or a reference window for
    /// [`Correlator::with_fixed_block`]) against the fixed side.
    ///
    /// `valid`, when given, marks the samples that take part; excluded
    /// samples are treated as zero after mean removal.
    pub fn surface(&self, moving: &Field, valid: Option<&[bool]>, ws: &mut Workspace) -> Result<CorrSurface> {
        if moving.dims() != (self.moving_w, self.moving_h) {
            return Err(Error::DimensionMismatch {
                expected_width: self.moving_w,
                expected_height: self.moving_h,
                width: moving.width(),
                height: moving.height(),
            });
        }
        if let Some(m) = valid {
            if m.len() != moving.len() {
                return Err(Error::DimensionMismatch {
                    expected_width: self.moving_w,
                    expected_height: self.moving_h,
                    width: m.len(),
                    height: 1,
                });
            }
        }
        let mut prepared = std::mem::take(&mut ws.prepared);
        let res = prepare_into(moving.as_slice(), valid, &mut prepared);
        let out = res.map(|_| self.surface_prepared(&prepared, ws));
        ws.prepared = prepared;
        out
    }

    fn surface_prepared(&self, prepared: &[f64], ws: &mut Workspace) -> CorrSurface {
        let c = self.nx / 2 + 1;
        let ny = self.ny;
        let mut spec = std::mem::take(&mut ws.spec);
        self.forward(prepared, self.moving_w, self.moving_h, &mut spec, ws);
        if self.moving_is_block {
            for (s, r) in spec.iter_mut().zip(&self.ref_spec) {
                *s = s.conj() * r;
            }
        } else {
            for (s, r) in spec.iter_mut().zip(&self.ref_spec) {
                *s *= r;
            }
        }
        self.col_inv.process_with_scratch(&mut spec, &mut ws.scratch);

        // c[t] = sum_q x[q] y[q + t]; map each surface shift to its lag t.
        let lag = |s: i64, n: usize| -> usize {
            match self.geometry {
                Geometry::Circular => (-s).rem_euclid(n as i64) as usize,
                Geometry::Windowed => {
                    let m = (self.out_w as i64 - 1) / 2;
                    (m - s) as usize
                }
            }
        };
        let mut values = Field::zeros(self.out_w, self.out_h);
        for iy in 0..self.out_h {
            let ty = lag(self.min_dy + iy as i64, ny);
            for kx in 0..c {
                ws.row_spec[kx] = spec[kx * ny + ty];
            }
            // Hermitian symmetry forces these to be real; drop rounding residue.
            ws.row_spec[0].im = 0.0;
            if self.nx % 2 == 0 {
                ws.row_spec[c - 1].im = 0.0;
            }
            self.c2r
                .process_with_scratch(&mut ws.row_spec, &mut ws.row_real, &mut ws.real_scratch)
                .expect("row buffers sized by plan");
            let row = values.row_mut(iy);
            for (ix, v) in row.iter_mut().enumerate() {
                let tx = lag(self.min_dx + ix as i64, self.nx);
                *v = ws.row_real[tx] * self.scale;
            }
        }
        ws.spec = spec;
        CorrSurface {
            values,
            min_dx: self.min_dx,
            min_dy: self.min_dy,
            wrap_x: self.wrap_x,
            wrap_y: self.wrap_y,
        }
    }
}

/// Normalized cross-correlation surface of `residual` against `fingerprint_block`.
pub fn ncc_surface(residual: &Field, fingerprint_block: &Field, max_shift: usize) -> Result<CorrSurface> {
    ncc_surface_masked(residual, None, fingerprint_block, max_shift)
}

pub fn ncc_surface_masked(
    residual: &Field,
    valid: Option<&[bool]>,
    fingerprint_block: &Field,
    max_shift: usize,
) -> Result<CorrSurface> {
    let corr = Correlator::new(fingerprint_block, residual.width(), residual.height(), max_shift)?;
    let mut ws = corr.workspace();
    corr.surface(residual, valid, &mut ws)
}

/// PCE of the best-matching shift of `residual` against `fingerprint_block`.
pub fn compute_pce(
    residual: &Field,
    fingerprint_block: &Field,
    max_shift: usize,
    exclude_radius: usize,
) -> Result<PceResult> {
    if exclude_radius == 0 {
        return Err(Error::InvalidConfig("exclude_radius must be >= 1".into()));
    }
    Ok(ncc_surface(residual, fingerprint_block, max_shift)?.pce(exclude_radius))
}
