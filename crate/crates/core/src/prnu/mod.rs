//! Noise residual extraction, fingerprint estimation and matching statistics.

pub mod correlation;
pub mod denoise;
pub mod fingerprint;

pub use correlation::{compute_pce, ncc_surface, ncc_surface_masked, CorrSurface, Correlator, PceResult};
pub use denoise::WaveletWiener;
pub use fingerprint::{estimate_fingerprint, Fingerprint};

use crate::error::{Error, Result};
use crate::field::Field;

/// One decoded video frame (luminance plane).
#[derive(Clone, Debug)]
pub struct Frame {
    pub pixels: Field,
    pub frame_index: usize,
    pub is_iframe: bool,
    /// Per-pixel reliability weights in `[0, 1]`.
    pub weight_mask: Option<Field>,
}

impl Frame {
    pub fn new(pixels: Field, frame_index: usize) -> Result<Self> {
        if !pixels.is_finite() {
            return Err(Error::NonFinite("frame pixels"));
        }
        Ok(Self {
            pixels,
            frame_index,
            is_iframe: false,
            weight_mask: None,
        })
    }

    pub fn with_iframe(mut self, is_iframe: bool) -> Self {
        self.is_iframe = is_iframe;
        self
    }

    pub fn with_weight_mask(mut self, mask: Field) -> Result<Self> {
        self.pixels.same_dims(&mask)?;
        if !mask.as_slice().iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig("weight mask values must lie in [0, 1]".into()));
        }
        self.weight_mask = Some(mask);
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }
}

/// Zero-mean noise residual of one frame.
#[derive(Clone, Debug)]
pub struct NoiseResidual {
    pub values: Field,
    pub source_frame: usize,
    /// Set when the frame carried no usable texture (e.g. a constant image).
    pub low_information: bool,
}

impl NoiseResidual {
    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }
}

/// Extracts the PRNU noise residual of a frame.
///
/// `denoise_strength` is the noise variance assumed by the wavelet Wiener
/// filter (0-255 intensity scale). The residual is zero-meaned globally and
/// per row and column.
pub fn extract_noise(frame: &Frame, denoise_strength: f64) -> Result<NoiseResidual> {
    if !(denoise_strength > 0.0) || !denoise_strength.is_finite() {
        return Err(Error::InvalidConfig("denoise_strength must be positive".into()));
    }
    if !frame.pixels.is_finite() {
        return Err(Error::NonFinite("frame pixels"));
    }
    let (w, h) = frame.pixels.dims();
    let (lo, hi) = frame.pixels.min_max();
    if lo == hi {
        return Ok(NoiseResidual {
            values: Field::zeros(w, h),
            source_frame: frame.frame_index,
            low_information: true,
        });
    }
    let mut values = WaveletWiener::new(denoise_strength).residual(&frame.pixels);
    values.remove_row_col_means();
    Ok(NoiseResidual {
        values,
        source_frame: frame.frame_index,
        low_information: false,
    })
}
