use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::prnu::correlation::compute_pce;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftMatch {
    pub shift: (i64, i64),
    pub pce: f64,
    pub peak_corr: f64,
    /// Number of translations scored, `(2 * range + 1)^2`.
    pub candidates: usize,
}

/// Finds the translation of `block` (nominally at `nominal_origin` in
/// reference coordinates) that maximizes PCE within `±range`.
pub fn shift_search(
    block: &Field,
    reference: &Field,
    nominal_origin: (usize, usize),
    range: usize,
    exclude_radius: usize,
) -> Result<ShiftMatch> {
    let (ox, oy) = (nominal_origin.0 as i64, nominal_origin.1 as i64);
    let r = range as i64;
    let (x1, y1) = (ox + (block.width() + range) as i64, oy + (block.height() + range) as i64);
    if ox < r || oy < r || x1 > reference.width() as i64 || y1 > reference.height() as i64 {
        return Err(Error::ReferenceTooSmall {
            ref_width: reference.width(),
            ref_height: reference.height(),
            x0: ox - r,
            y0: oy - r,
            x1,
            y1,
        });
    }
    let window = reference.crop(
        nominal_origin.0 - range,
        nominal_origin.1 - range,
        block.width() + 2 * range,
        block.height() + 2 * range,
    )?;
    let res = compute_pce(block, &window, range, exclude_radius)?;
    Ok(ShiftMatch {
        shift: res.peak_xy,
        pce: res.pce,
        peak_corr: res.peak_corr,
        candidates: (2 * range + 1).pow(2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(w: usize, h: usize, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_fn(w, h, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn block_in_place_has_zero_shift() {
        let k = noise(200, 180, 1);
        let block = k.crop(60, 50, 64, 64).unwrap();
        let m = shift_search(&block, &k, (60, 50), 50, 5).unwrap();
        assert_eq!(m.shift, (0, 0));
        assert_eq!(m.candidates, 101 * 101);
    }

    #[test]
    fn displaced_block_reports_its_offset() {
        let k = noise(260, 260, 2);
        let origin = (100usize, 100usize);
        let s = (21i64, -34i64);
        let block = k
            .crop((origin.0 as i64 - s.0) as usize, (origin.1 as i64 - s.1) as usize, 64, 64)
            .unwrap();
        let m = shift_search(&block, &k, origin, 50, 5).unwrap();
        assert_eq!(m.shift, s);
    }

    #[test]
    fn rectangular_blocks_are_supported() {
        let k = noise(120, 100, 3);
        let block = k.crop(32, 30, 40, 24).unwrap();
        let m = shift_search(&block, &k, (30, 30), 10, 5).unwrap();
        assert_eq!(m.shift, (-2, 0));
    }

    #[test]
    fn too_small_reference_is_rejected() {
        let k = noise(100, 100, 4);
        let block = k.crop(10, 10, 64, 64).unwrap();
        assert!(matches!(
            shift_search(&block, &k, (10, 10), 50, 5),
            Err(Error::ReferenceTooSmall { .. })
        ));
    }
}
