//! Wavelet-domain local Wiener filtering.
//!
//! The image is decomposed with a periodized orthonormal 8-tap Daubechies
//! transform. In every detail subband the local signal variance is estimated
//! as the minimum over square windows of 3, 5, 7 and 9 samples; coefficients
//! are then split into a signal part `c * v / (v + s2)` and a noise part
//! `c * s2 / (v + s2)`, where `s2` is the assumed noise variance. The noise
//! residual is the inverse transform of the noise parts alone (the coarsest
//! approximation band carries no noise).

use crate::field::Field;

/// Daubechies 8-tap (4 vanishing moments) decomposition low-pass filter.
const DB4_LO: [f64; 8] = [
    -0.010_597_401_784_997_278,
    0.032_883_011_666_982_945,
    0.030_841_381_835_986_965,
    -0.187_034_811_718_881_14,
    -0.027_983_769_416_983_85,
    0.630_880_767_929_590_4,
    0.714_846_570_552_541_5,
    0.230_377_813_308_855_23,
];

const VARIANCE_WINDOWS: [usize; 4] = [3, 5, 7, 9];

/// Coarsest subband side below which no further level is taken.
const MIN_BAND: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveletWiener {
    pub levels: usize,
    /// Assumed noise variance on the 0-255 intensity scale.
    pub noise_variance: f64,
}

impl Default for WaveletWiener {
    fn default() -> Self {
        Self {
            levels: 4,
            noise_variance: 3.0,
        }
    }
}

fn high_pass() -> [f64; 8] {
    let mut g = [0.0; 8];
    for (n, gn) in g.iter_mut().enumerate() {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        *gn = sign * DB4_LO[7 - n];
    }
    g
}

/// One periodized analysis step on a strided 1D signal.
fn analyze(input: &[f64], lo: &mut [f64], hi: &mut [f64], g: &[f64; 8]) {
    let n = input.len();
    let half = n / 2;
    for k in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        for t in 0..8 {
            let v = input[(2 * k + t) % n];
            a += DB4_LO[t] * v;
            d += g[t] * v;
        }
        lo[k] = a;
        hi[k] = d;
    }
}

/// Adjoint of [`analyze`]; exact inverse because the periodized bank is orthonormal.
fn synthesize(lo: &[f64], hi: &[f64], out: &mut [f64], g: &[f64; 8]) {
    let n = out.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..lo.len() {
        for t in 0..8 {
            out[(2 * k + t) % n] += DB4_LO[t] * lo[k] + g[t] * hi[k];
        }
    }
}

/// In-place single-level 2D transform of the top-left `w x h` region of a
/// buffer with row stride `stride`. Quadrants afterwards: LL top-left,
/// HL top-right, LH bottom-left, HH bottom-right.
fn dwt2_level(buf: &mut [f64], stride: usize, w: usize, h: usize, g: &[f64; 8]) {
    let mut line = vec![0.0; w.max(h)];
    let mut lo = vec![0.0; w.max(h) / 2];
    let mut hi = vec![0.0; w.max(h) / 2];
    for y in 0..h {
        line[..w].copy_from_slice(&buf[y * stride..y * stride + w]);
        analyze(&line[..w], &mut lo[..w / 2], &mut hi[..w / 2], g);
        buf[y * stride..y * stride + w / 2].copy_from_slice(&lo[..w / 2]);
        buf[y * stride + w / 2..y * stride + w].copy_from_slice(&hi[..w / 2]);
    }
    for x in 0..w {
        for y in 0..h {
            line[y] = buf[y * stride + x];
        }
        analyze(&line[..h], &mut lo[..h / 2], &mut hi[..h / 2], g);
        for y in 0..h / 2 {
            buf[y * stride + x] = lo[y];
            buf[(y + h / 2) * stride + x] = hi[y];
        }
    }
}

fn idwt2_level(buf: &mut [f64], stride: usize, w: usize, h: usize, g: &[f64; 8]) {
    let mut line = vec![0.0; w.max(h)];
    let mut lo = vec![0.0; w.max(h) / 2];
    let mut hi = vec![0.0; w.max(h) / 2];
    for x in 0..w {
        for y in 0..h / 2 {
            lo[y] = buf[y * stride + x];
            hi[y] = buf[(y + h / 2) * stride + x];
        }
        synthesize(&lo[..h / 2], &hi[..h / 2], &mut line[..h], g);
        for y in 0..h {
            buf[y * stride + x] = line[y];
        }
    }
    for y in 0..h {
        lo[..w / 2].copy_from_slice(&buf[y * stride..y * stride + w / 2]);
        hi[..w / 2].copy_from_slice(&buf[y * stride + w / 2..y * stride + w]);
        synthesize(&lo[..w / 2], &hi[..w / 2], &mut line[..w], g);
        buf[y * stride..y * stride + w].copy_from_slice(&line[..w]);
    }
}

/// Replaces every coefficient of a `w x h` subband (located at `(x0, y0)`)
/// by its noise component under the local Wiener model.
fn wiener_noise_part(buf: &mut [f64], stride: usize, x0: usize, y0: usize, w: usize, h: usize, s2: f64) {
    // Integral image of squared coefficients.
    let iw = w + 1;
    let mut integral = vec![0.0; iw * (h + 1)];
    for y in 0..h {
        let mut acc = 0.0;
        for x in 0..w {
            let c = buf[(y0 + y) * stride + x0 + x];
            acc += c * c;
            integral[(y + 1) * iw + x + 1] = integral[y * iw + x + 1] + acc;
        }
    }
    let mut noise = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut var = f64::INFINITY;
            for &win in &VARIANCE_WINDOWS {
                let r = win / 2;
                let xa = x.saturating_sub(r);
                let ya = y.saturating_sub(r);
                let xb = (x + r + 1).min(w);
                let yb = (y + r + 1).min(h);
                let sum = integral[yb * iw + xb] - integral[ya * iw + xb] - integral[yb * iw + xa]
                    + integral[ya * iw + xa];
                let count = ((xb - xa) * (yb - ya)) as f64;
                var = var.min((sum / count - s2).max(0.0));
            }
            let c = buf[(y0 + y) * stride + x0 + x];
            noise[y * w + x] = c * s2 / (var + s2);
        }
    }
    for y in 0..h {
        buf[(y0 + y) * stride + x0..(y0 + y) * stride + x0 + w]
            .copy_from_slice(&noise[y * w..(y + 1) * w]);
    }
}

/// Symmetric (half-sample) reflection of an index into `[0, n)`.
fn reflect(i: usize, n: usize) -> usize {
    let period = 2 * n;
    let m = i % period;
    if m < n {
        m
    } else {
        period - 1 - m
    }
}

impl WaveletWiener {
    pub fn new(noise_variance: f64) -> Self {
        Self {
            noise_variance,
            ..Self::default()
        }
    }

    /// Number of levels actually used for an image of this size.
    pub fn effective_levels(&self, width: usize, height: usize) -> usize {
        let mut levels = 0;
        let mut side = width.min(height);
        while levels < self.levels && side / 2 >= MIN_BAND {
            side /= 2;
            levels += 1;
        }
        levels.max(1)
    }

    /// Returns the noise residual `image - denoised(image)`.
    pub fn residual(&self, image: &Field) -> Field {
        let (w, h) = image.dims();
        let levels = self.effective_levels(w, h);
        let q = 1usize << levels;
        let pw = w.div_ceil(q) * q;
        let ph = h.div_ceil(q) * q;

        let mut buf = vec![0.0; pw * ph];
        for y in 0..ph {
            let sy = reflect(y, h);
            for x in 0..pw {
                buf[y * pw + x] = image.get(reflect(x, w), sy);
            }
        }

        let g = high_pass();
        let (mut cw, mut ch) = (pw, ph);
        for _ in 0..levels {
            dwt2_level(&mut buf, pw, cw, ch, &g);
            let (hw, hh) = (cw / 2, ch / 2);
            wiener_noise_part(&mut buf, pw, hw, 0, hw, hh, self.noise_variance);
            wiener_noise_part(&mut buf, pw, 0, hh, hw, hh, self.noise_variance);
            wiener_noise_part(&mut buf, pw, hw, hh, hw, hh, self.noise_variance);
            cw = hw;
            ch = hh;
        }
        for y in 0..ch {
            buf[y * pw..y * pw + cw].iter_mut().for_each(|v| *v = 0.0);
        }
        for _ in 0..levels {
            cw *= 2;
            ch *= 2;
            idwt2_level(&mut buf, pw, cw, ch, &g);
        }

        Field::from_fn(w, h, |x, y| buf[y * pw + x])
    }
}
