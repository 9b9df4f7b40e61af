//! Dense row-major 2D float fields.
//!
//! Everything the pipeline moves around (frames, residuals, fingerprints,
//! weight masks, correlation surfaces) is a [`Field`]. Coordinates are
//! `(x, y)` with `x` the column and `y` the row, origin top-left.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected_width: width,
                expected_height: height,
                width: data.len(),
                height: 1,
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    #[inline]
    pub fn row_mut(&mut self, y: usize) -> &mut [f64] {
        &mut self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_dims(&self, other: &Field) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected_width: self.width,
                expected_height: self.height,
                width: other.width,
                height: other.height,
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        let m = self.mean();
        self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|v| *v *= k);
    }

    pub fn subtract_mean(&mut self) {
        let m = self.mean();
        self.data.iter_mut().for_each(|v| *v -= m);
    }

    /// Removes the mean of every row, then of every column.
    ///
    /// After this the global mean is zero as well (up to rounding), which
    /// the zero-mean invariants of residuals and fingerprints rely on.
    pub fn remove_row_col_means(&mut self) {
        let (w, h) = self.dims();
        if w == 0 || h == 0 {
            return;
        }
        for y in 0..h {
            let row = self.row_mut(y);
            let m = row.iter().sum::<f64>() / w as f64;
            row.iter_mut().for_each(|v| *v -= m);
        }
        let mut col = vec![0.0; w];
        for y in 0..h {
            for (c, v) in col.iter_mut().zip(self.row(y)) {
                *c += v;
            }
        }
        col.iter_mut().for_each(|c| *c /= h as f64);
        for y in 0..h {
            for (v, c) in self.row_mut(y).iter_mut().zip(&col) {
                *v -= c;
            }
        }
        // Column correction keeps row sums at zero; this pass only absorbs rounding.
        self.subtract_mean();
    }

    /// Copies the `w x h` window starting at `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Field> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::ReferenceTooSmall {
                ref_width: self.width,
                ref_height: self.height,
                x0: x0 as i64,
                x1: (x0 + w) as i64,
                y0: y0 as i64,
                y1: (y0 + h) as i64,
            });
        }
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.row(y)[x0..x0 + w]);
        }
        Ok(Field {
            width: w,
            height: h,
            data,
        })
    }

    /// Circular shift: `out[(x + dx) mod w, (y + dy) mod h] = self[x, y]`.
    pub fn roll(&self, dx: i64, dy: i64) -> Field {
        let (w, h) = (self.width as i64, self.height as i64);
        let mut out = Field::zeros(self.width, self.height);
        for y in 0..h {
            let ty = (y + dy).rem_euclid(h) as usize;
            for x in 0..w {
                let tx = (x + dx).rem_euclid(w) as usize;
                out.set(tx, ty, self.get(x as usize, y as usize));
            }
        }
        out
    }

    pub fn dot(&self, other: &Field) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Pearson correlation coefficient between two equally sized fields.
    pub fn correlation(&self, other: &Field) -> Result<f64> {
        self.same_dims(other)?;
        let (ma, mb) = (self.mean(), other.mean());
        let mut num = 0.0;
        let mut da = 0.0;
        let mut db = 0.0;
        for (a, b) in self.data.iter().zip(&other.data) {
            let (a, b) = (a - ma, b - mb);
            num += a * b;
            da += a * a;
            db += b * b;
        }
        if da == 0.0 || db == 0.0 {
            return Err(Error::ZeroVariance);
        }
        Ok(num / (da.sqrt() * db.sqrt()))
    }
}
