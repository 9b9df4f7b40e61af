//! PRNU-based source camera verification for digitally stabilized video.
//!
//! Per-frame stabilization warps are inverted on PRNU noise blocks with a
//! three-level hierarchical grid search over corner-vertex displacements,
//! candidate inversions are validated with sub-block coherence checks, and
//! validated blocks are aggregated into rank-wise fingerprint estimates.

pub mod error;
pub mod field;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod prnu;
pub mod search;
pub mod synth;

pub use error::{Error, Result};
pub use field::Field;
pub use geometry::{BlockGeometry, Corner, CornerWarp, Homography};
pub use prnu::{extract_noise, Fingerprint, Frame, NoiseResidual, PceResult};
pub use pipeline::{verify, PipelineConfig, ValidationParams, VerifyReport};
pub use search::{ScoredTransform, SearchConfig, SearchTrace, Variant};
