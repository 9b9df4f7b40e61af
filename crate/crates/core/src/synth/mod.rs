//! Synthetic sensors, scenes and stabilized videos with ground truth, plus
//! the experiment harnesses built on them.
//!
//! Sensor model: `frame = scene * (1 + strength * K) + N(0, sigma^2)`, with
//! `K` i.i.d. standard normal. Stabilization moves content at `p` to
//! `T(p)` with nearest-neighbor resampling; pixels whose source lies outside
//! the sensor are filled from the nearest edge (an inpainting stand-in) and
//! get zero weight. Codec degradation is approximated by a Gaussian blur.

pub mod experiments;
pub mod oracle;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::{corners_to_homography, BlockGeometry, Corner, CornerWarp, Homography};
use crate::prnu::Frame;

/// Derives an independent stream seed from a base seed and a salt.
pub fn sub_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gaussian_field(w: usize, h: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(w, h, |_, _| StandardNormal.sample(&mut rng))
}

/// Ground-truth multiplicative sensor pattern.
#[derive(Clone, Debug)]
pub struct SyntheticSensor {
    k: Field,
    pub strength: f64,
    pub seed: u64,
}

impl SyntheticSensor {
    pub fn new(width: usize, height: usize, strength: f64, seed: u64) -> Self {
        let mut k = gaussian_field(width, height, sub_seed(seed, 0x5e75));
        k.subtract_mean();
        Self { k, strength, seed }
    }

    pub fn k(&self) -> &Field {
        &self.k
    }

    pub fn width(&self) -> usize {
        self.k.width()
    }

    pub fn height(&self) -> usize {
        self.k.height()
    }
}

/// Separable Gaussian blur with edge clamping.
pub fn gaussian_blur(f: &Field, sigma: f64) -> Field {
    if sigma <= 0.0 {
        return f.clone();
    }
    let r = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.into_iter().map(|v| v / norm).collect();
    let (w, h) = f.dims();
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let tmp = Field::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(i, k)| k * f.get(clamp(x as i64 + i as i64 - r, w), y))
            .sum()
    });
    Field::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(i, k)| k * tmp.get(x, clamp(y as i64 + i as i64 - r, h)))
            .sum()
    })
}

fn standardize(mut f: Field) -> Field {
    f.subtract_mean();
    let sd = f.variance().sqrt();
    if sd > 0.0 {
        f.scale(1.0 / sd);
    }
    f
}

/// Procedural textured scene: band-limited noise at two scales around mid-gray.
pub fn textured_scene(width: usize, height: usize, seed: u64) -> Field {
    let coarse = standardize(gaussian_blur(&gaussian_field(width, height, sub_seed(seed, 1)), 6.0));
    let fine = standardize(gaussian_blur(&gaussian_field(width, height, sub_seed(seed, 2)), 1.5));
    Field::from_fn(width, height, |x, y| {
        (128.0 + 35.0 * coarse.get(x, y) + 10.0 * fine.get(x, y)).clamp(16.0, 240.0)
    })
}

fn quantize(f: &Field) -> Field {
    f.map(|v| v.round().clamp(0.0, 255.0))
}

/// Embeds the sensor pattern into a scene and adds read noise; the output is
/// quantized to 8-bit levels.
pub fn render_frame(scene: &Field, sensor: &SyntheticSensor, noise_sigma: f64, seed: u64, frame_index: usize) -> Result<Frame> {
    scene.same_dims(sensor.k())?;
    if !scene.is_finite() {
        return Err(Error::NonFinite("scene"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 0xf00d));
    let k = sensor.k();
    let pixels = Field::from_fn(scene.width(), scene.height(), |x, y| {
        let n: f64 = StandardNormal.sample(&mut rng);
        scene.get(x, y) * (1.0 + sensor.strength * k.get(x, y)) + noise_sigma * n
    });
    Frame::new(quantize(&pixels), frame_index)
}

/// Applies `t` (content at `p` moves to `t(p)`) to a frame. Out-of-sensor
/// samples are edge-filled and receive zero weight.
pub fn transform_frame(frame: &Frame, t: &Homography) -> Result<Frame> {
    let inv = t.inverse()?;
    let (w, h) = (frame.width(), frame.height());
    let src = &frame.pixels;
    let mask_in = frame.weight_mask.as_ref();
    let mut pixels = Field::zeros(w, h);
    let mut mask = Field::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = inv.apply(x as f64, y as f64);
            let (ix, iy) = (sx.round() as i64, sy.round() as i64);
            let inside = ix >= 0 && iy >= 0 && ix < w as i64 && iy < h as i64;
            let cx = ix.clamp(0, w as i64 - 1) as usize;
            let cy = iy.clamp(0, h as i64 - 1) as usize;
            pixels.set(x, y, src.get(cx, cy));
            if inside {
                mask.set(x, y, mask_in.map_or(1.0, |m| m.get(cx, cy)));
            }
        }
    }
    let out = Frame::new(pixels, frame.frame_index)?.with_iframe(frame.is_iframe);
    out.with_weight_mask(mask)
}

/// Stabilization by a corner warp on `geom` followed by a global shift.
pub fn stabilize_frame(frame: &Frame, geom: &BlockGeometry, warp: &CornerWarp, shift: (i64, i64)) -> Result<Frame> {
    let h = corners_to_homography(warp, geom)?;
    let t = Homography::translation(shift.0 as f64, shift.1 as f64).compose(&h);
    transform_frame(frame, &t)
}

/// Moves content by a per-pixel displacement field plus a global shift:
/// `out[p] = frame[round(p - d(p) - shift)]`, edge-filled with zero weight
/// outside the sensor.
pub fn displace_frame(frame: &Frame, dx: &Field, dy: &Field, shift: (i64, i64)) -> Result<Frame> {
    frame.pixels.same_dims(dx)?;
    frame.pixels.same_dims(dy)?;
    let (w, h) = (frame.width(), frame.height());
    let mut pixels = Field::zeros(w, h);
    let mut mask = Field::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let ix = (x as f64 - dx.get(x, y) - shift.0 as f64).round() as i64;
            let iy = (y as f64 - dy.get(x, y) - shift.1 as f64).round() as i64;
            let inside = ix >= 0 && iy >= 0 && ix < w as i64 && iy < h as i64;
            let cx = ix.clamp(0, w as i64 - 1) as usize;
            let cy = iy.clamp(0, h as i64 - 1) as usize;
            pixels.set(x, y, frame.pixels.get(cx, cy));
            if inside {
                mask.set(x, y, frame.weight_mask.as_ref().map_or(1.0, |m| m.get(cx, cy)));
            }
        }
    }
    Frame::new(pixels, frame.frame_index)?
        .with_iframe(frame.is_iframe)
        .with_weight_mask(mask)
}

/// Block of `pattern` at `geom` after the transform `translation(shift) ∘ H(warp)`:
/// `out[p] = pattern[round(T^-1 p)]`. Samples from outside the pattern are 0.
pub fn transformed_block(pattern: &Field, geom: &BlockGeometry, warp: &CornerWarp, shift: (i64, i64)) -> Result<Field> {
    let h = corners_to_homography(warp, geom)?;
    let t = Homography::translation(shift.0 as f64, shift.1 as f64).compose(&h);
    let o = (geom.block_origin.0 as i64, geom.block_origin.1 as i64);
    Ok(crate::geometry::resample_nn(pattern, (0, 0), &t.inverse()?, o, geom.block_size, geom.block_size).values)
}

/// Applies the compression surrogate (blur plus requantization).
pub fn degrade(frame: &Frame, blur_sigma: f64) -> Result<Frame> {
    if blur_sigma <= 0.0 {
        return Ok(frame.clone());
    }
    let mut out = frame.clone();
    out.pixels = quantize(&gaussian_blur(&frame.pixels, blur_sigma));
    Ok(out)
}

/// Per-frame geometric motion of a generated video.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Motion {
    /// No stabilization.
    Static,
    /// Per-frame rotation about the frame center, isotropic scaling and shift.
    Similarity {
        max_rotation_deg: f64,
        max_scale_dev: f64,
        max_shift: i64,
    },
    /// Per-frame corner warp of the central block plus a global shift.
    /// With `pinned` set, corner offsets are drawn relative to that corner.
    Corner {
        window: i32,
        max_shift: i64,
        pinned: Option<Corner>,
    },
    /// Smooth spatially variant displacement field (mesh-style
    /// stabilization) with peak magnitude `amplitude` pixels and spatial
    /// scale `smoothness`, plus a global shift.
    Mesh {
        amplitude: f64,
        smoothness: f64,
        max_shift: i64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoSpec {
    pub n_frames: usize,
    pub noise_sigma: f64,
    pub blur_sigma: f64,
    /// Every `iframe_interval`-th frame is flagged as an I frame (0: none).
    pub iframe_interval: usize,
    pub block_size: usize,
    pub motion: Motion,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpLogEntry {
    pub frame_index: usize,
    /// Corner displacements `(dxA, dyA, dxB, dyB, dxC, dyC, dxD, dyD)`.
    pub corners: [i32; 8],
    pub shift: (i64, i64),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotation_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    /// Peak displacement of a mesh warp.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_amplitude: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthWarpLog {
    pub seed: u64,
    pub noise_sigma: f64,
    pub compression_blur: f64,
    pub block_geometry: BlockGeometry,
    pub frames: Vec<WarpLogEntry>,
}

impl GroundTruthWarpLog {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticVideo {
    pub frames: Vec<Frame>,
    pub log: GroundTruthWarpLog,
}

/// Draws a corner warp with components in `±window`; with a pinned corner
/// the other corners are offsets of up to `±window` from it, which itself
/// moves within `±window`.
pub fn random_warp(rng: &mut ChaCha8Rng, window: i32, pinned: Option<Corner>) -> CornerWarp {
    let mut c = [0i32; 8];
    for v in c.iter_mut() {
        *v = rng.random_range(-window..=window);
    }
    if let Some(k) = pinned {
        let anchor = [c[2 * k.index()], c[2 * k.index() + 1]];
        for i in (0..4).filter(|&i| i != k.index()) {
            c[2 * i] += anchor[0];
            c[2 * i + 1] += anchor[1];
        }
    }
    CornerWarp::from_components(c)
}

/// Renders a video of `sensor` with the motion model of `spec`.
pub fn generate_video(sensor: &SyntheticSensor, spec: &VideoSpec) -> Result<SyntheticVideo> {
    let (w, h) = (sensor.width(), sensor.height());
    let geom = BlockGeometry::centered(w, h, spec.block_size)?;
    let mut motion_rng = ChaCha8Rng::seed_from_u64(sub_seed(spec.seed, 0x6d6f74));
    let mut frames = Vec::with_capacity(spec.n_frames);
    let mut entries = Vec::with_capacity(spec.n_frames);
    for i in 0..spec.n_frames {
        let frame_seed = sub_seed(spec.seed, 1000 + i as u64);
        let scene = textured_scene(w, h, sub_seed(frame_seed, 7));
        let raw = render_frame(&scene, sensor, spec.noise_sigma, frame_seed, i)?;
        let mut entry = WarpLogEntry {
            frame_index: i,
            corners: [0; 8],
            shift: (0, 0),
            rotation_deg: None,
            scale: None,
            mesh_amplitude: None,
        };
        let moved = match &spec.motion {
            Motion::Static => raw,
            Motion::Similarity {
                max_rotation_deg,
                max_scale_dev,
                max_shift,
            } => {
                let rot = if *max_rotation_deg > 0.0 {
                    motion_rng.random_range(-max_rotation_deg..=*max_rotation_deg)
                } else {
                    0.0
                };
                let scale = if *max_scale_dev > 0.0 {
                    1.0 + motion_rng.random_range(-max_scale_dev..=*max_scale_dev)
                } else {
                    1.0
                };
                let s = (
                    motion_rng.random_range(-max_shift..=*max_shift),
                    motion_rng.random_range(-max_shift..=*max_shift),
                );
                entry.rotation_deg = Some(rot);
                entry.scale = Some(scale);
                entry.shift = s;
                let center = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
                let t = Homography::translation(s.0 as f64, s.1 as f64).compose(&Homography::similarity(center, rot, scale));
                transform_frame(&raw, &t)?
            }
            Motion::Corner {
                window,
                max_shift,
                pinned,
            } => {
                let warp = random_warp(&mut motion_rng, *window, *pinned);
                let s = (
                    motion_rng.random_range(-max_shift..=*max_shift),
                    motion_rng.random_range(-max_shift..=*max_shift),
                );
                entry.corners = warp.components();
                entry.shift = s;
                stabilize_frame(&raw, &geom, &warp, s)?
            }
            Motion::Mesh {
                amplitude,
                smoothness,
                max_shift,
            } => {
                let field = |rng: &mut ChaCha8Rng| {
                    let f = gaussian_blur(&Field::from_fn(w, h, |_, _| StandardNormal.sample(rng)), *smoothness);
                    let (lo, hi) = f.min_max();
                    let peak = lo.abs().max(hi.abs());
                    f.map(|v| if peak > 0.0 { v * amplitude / peak } else { 0.0 })
                };
                let (dx, dy) = (field(&mut motion_rng), field(&mut motion_rng));
                let s = (
                    motion_rng.random_range(-max_shift..=*max_shift),
                    motion_rng.random_range(-max_shift..=*max_shift),
                );
                entry.shift = s;
                entry.mesh_amplitude = Some(*amplitude);
                displace_frame(&raw, &dx, &dy, s)?
            }
        };
        let is_i = spec.iframe_interval > 0 && i % spec.iframe_interval == 0;
        frames.push(degrade(&moved, spec.blur_sigma)?.with_iframe(is_i));
        entries.push(entry);
    }
    Ok(SyntheticVideo {
        frames,
        log: GroundTruthWarpLog {
            seed: spec.seed,
            noise_sigma: spec.noise_sigma,
            compression_blur: spec.blur_sigma,
            block_geometry: geom,
            frames: entries,
        },
    })
}

/// Reference fingerprint of `sensor` from `n` unstabilized frames.
pub fn reference_fingerprint(
    sensor: &SyntheticSensor,
    n: usize,
    noise_sigma: f64,
    denoise_strength: f64,
    seed: u64,
) -> Result<crate::prnu::Fingerprint> {
    let (w, h) = (sensor.width(), sensor.height());
    let mut frames = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    for i in 0..n {
        let s = sub_seed(seed, 50_000 + i as u64);
        let f = render_frame(&textured_scene(w, h, sub_seed(s, 3)), sensor, noise_sigma, s, i)?;
        residuals.push(crate::prnu::extract_noise(&f, denoise_strength)?);
        frames.push(f);
    }
    crate::prnu::fingerprint::estimate_fingerprint_labeled(&residuals, &frames, &format!("synthetic-{}", sensor.seed))
}
