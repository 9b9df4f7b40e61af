//! Fixtures shared by the benchmarks.

use prnustab::geometry::{BlockGeometry, CornerWarp};
use prnustab::synth::{render_frame, textured_scene, transformed_block, SyntheticSensor};
use prnustab::{Field, Frame, Result};

/// Reference pattern, block geometry and a block cut from the pattern
/// through a known warp and shift.
pub struct SearchFixture {
    pub reference: Field,
    pub geom: BlockGeometry,
    pub block: Field,
    pub warp: CornerWarp,
    pub shift: (i64, i64),
}

pub fn search_fixture(block_size: usize, shift_range: usize, seed: u64) -> Result<SearchFixture> {
    let margin = shift_range + 8;
    let n = block_size + 2 * margin;
    let reference = SyntheticSensor::new(n, n, 1.0, seed).k().clone();
    let geom = BlockGeometry::new((margin, margin), block_size);
    let warp = CornerWarp::from_components([0, 0, 2, -1, -1, 1, 3, 0]);
    let shift = (5, -7);
    let block = transformed_block(&reference, &geom, &warp, shift)?;
    Ok(SearchFixture {
        reference,
        geom,
        block,
        warp,
        shift,
    })
}

/// One rendered frame of a textured scene.
pub fn frame(width: usize, height: usize, seed: u64) -> Result<Frame> {
    let sensor = SyntheticSensor::new(width, height, 0.02, seed);
    render_frame(&textured_scene(width, height, seed), &sensor, 2.0, seed, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_shapes() {
        let f = search_fixture(32, 4, 1).unwrap();
        assert_eq!(f.block.dims(), (32, 32));
        assert_eq!(f.reference.dims(), (56, 56));
        assert_eq!(frame(40, 30, 2).unwrap().width(), 40);
    }
}
