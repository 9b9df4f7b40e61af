//! Camera reference patterns and their on-disk format.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! "PRNU1" | width u32 | height u32 | n_sources u32 | label_len u16 | label (UTF-8)
//!         | width * height f32 values, row-major
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::prnu::{Frame, NoiseResidual};

pub const MAGIC: &[u8; 5] = b"PRNU1";

/// Aggregated reference PRNU pattern.
///
/// Values are zero-mean, unit-variance and stored at `f32` precision so
/// that persisting and reloading reproduces them bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct Fingerprint {
    values: Field,
    pub n_sources: u32,
    pub camera_label: String,
    /// Standard deviation divided out during normalization; 0 for patterns
    /// loaded from disk or with no signal.
    pub normalization_scale: f64,
}

impl Fingerprint {
    /// Wraps a pattern, applying row/column zero-meaning and unit-variance normalization.
    pub fn from_pattern(mut values: Field, n_sources: u32, camera_label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("fingerprint values"));
        }
        if !values.is_finite() {
            return Err(Error::NonFinite("fingerprint values"));
        }
        values.remove_row_col_means();
        let sd = values.variance().sqrt();
        if sd > 0.0 {
            values.scale(1.0 / sd);
        }
        let mut values = values.map(|v| v as f32 as f64);
        // Quantization can leave a mean of ~1e-9; pin it back.
        let m = values.mean();
        if m != 0.0 {
            values = values.map(|v| (v - m) as f32 as f64);
        }
        Ok(Self {
            values,
            n_sources,
            camera_label: camera_label.into(),
            normalization_scale: sd,
        })
    }

    pub fn values(&self) -> &Field {
        &self.values
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let label = self.camera_label.as_bytes();
        if label.len() > u16::MAX as usize {
            return Err(Error::Format("camera label longer than 65535 bytes".into()));
        }
        w.write_all(MAGIC)?;
        w.write_all(&(self.width() as u32).to_le_bytes())?;
        w.write_all(&(self.height() as u32).to_le_bytes())?;
        w.write_all(&self.n_sources.to_le_bytes())?;
        w.write_all(&(label.len() as u16).to_le_bytes())?;
        w.write_all(label)?;
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for v in self.values.as_slice() {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let mut u32buf = [0u8; 4];
        let mut read_u32 = |r: &mut dyn Read| -> Result<u32> {
            r.read_exact(&mut u32buf).map_err(|_| Error::Format("truncated header".into()))?;
            Ok(u32::from_le_bytes(u32buf))
        };
        let width = read_u32(&mut r)? as usize;
        let height = read_u32(&mut r)? as usize;
        let n_sources = read_u32(&mut r)?;
        let mut u16buf = [0u8; 2];
        r.read_exact(&mut u16buf).map_err(|_| Error::Format("truncated header".into()))?;
        let mut label = vec![0u8; u16::from_le_bytes(u16buf) as usize];
        r.read_exact(&mut label).map_err(|_| Error::Format("truncated label".into()))?;
        let camera_label = String::from_utf8(label).map_err(|_| Error::Format("label is not UTF-8".into()))?;

        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
        let mut raw = vec![0u8; n * 4];
        r.read_exact(&mut raw).map_err(|_| Error::Format("truncated sample data".into()))?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::Format("trailing bytes after sample data".into()));
        }
        let data: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("fingerprint file samples"));
        }
        Ok(Self {
            values: Field::new(width, height, data)?,
            n_sources,
            camera_label,
            normalization_scale: 0.0,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

/// Maximum-likelihood estimate `sum(W_i I_i) / sum(I_i^2)`, then
/// row/column zero-meaned and variance-normalized.
pub fn estimate_fingerprint(residuals: &[NoiseResidual], frames: &[Frame]) -> Result<Fingerprint> {
    estimate_fingerprint_labeled(residuals, frames, "")
}

pub fn estimate_fingerprint_labeled(
    residuals: &[NoiseResidual],
    frames: &[Frame],
    label: &str,
) -> Result<Fingerprint> {
    let first = residuals.first().ok_or(Error::Empty("residual list"))?;
    if frames.len() != residuals.len() {
        return Err(Error::InvalidConfig(format!(
            "{} residuals but {} frames",
            residuals.len(),
            frames.len()
        )));
    }
    let (w, h) = first.values.dims();
    let mut num = Field::zeros(w, h);
    let mut den = Field::zeros(w, h);
    for (r, f) in residuals.iter().zip(frames) {
        first.values.same_dims(&r.values)?;
        first.values.same_dims(&f.pixels)?;
        let (n, d) = (num.as_mut_slice(), den.as_mut_slice());
        for (((nv, dv), wv), iv) in n.iter_mut().zip(d.iter_mut()).zip(r.values.as_slice()).zip(f.pixels.as_slice()) {
            *nv += wv * iv;
            *dv += iv * iv;
        }
    }
    let k = Field::from_fn(w, h, |x, y| {
        let d = den.get(x, y);
        if d > 0.0 {
            num.get(x, y) / d
        } else {
            0.0
        }
    });
    Fingerprint::from_pattern(k, residuals.len() as u32, label)
}
