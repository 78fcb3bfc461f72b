//! Segmentation mask comparison.
//!
//! Masks are 8-bit rasters where any nonzero pixel is foreground. Objects are
//! extracted as run-length encoded connected components, indexed by their
//! bounding boxes in a bulk-loaded R-tree, and compared with area-based
//! metrics. Because objects are exact pixel sets, every area is exact.

mod join;
mod knn;
mod label;
mod mask;
mod metrics;
mod pgm;
mod rtree;

use thiserror::Error;

pub use join::{brute_force_join, spatial_join, JoinPair};
pub use knn::{knn, KnnQuery, Neighbor};
pub use label::{extract_objects, rasterize, Connectivity, ObjectMask, Run, SegObject};
pub use mask::Mask;
pub use metrics::{
    compare, dice, jaccard, overlap_ratio, pixel_diff, signed_area_diff, MetricKind, MetricValue,
};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm};
pub use rtree::{RTree, Rect};

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("mask dimensions differ: {a_width}x{a_height} vs {b_width}x{b_height}")]
    ShapeMismatch {
        a_width: usize,
        a_height: usize,
        b_width: usize,
        b_height: usize,
    },
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("malformed PGM: {0}")]
    Pgm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_shape(a: &Mask, b: &Mask) -> Result<(), SpatialError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(SpatialError::ShapeMismatch {
            a_width: a.width(),
            a_height: a.height(),
            b_width: b.width(),
            b_height: b.height(),
        });
    }
    Ok(())
}
