//! Synthetic image-analysis workflows for running studies without data.
//!
//! A seeded [`SyntheticScene`] stands in for an image tile. The workflow
//! normalizes it, segments it with thresholding plus size filtering, and
//! compares the mask against a reference. With the reference computed at
//! known parameters `p*`, the tuning objective has a known optimum.

mod pipeline;
mod scene;

use thiserror::Error;

use crate::space::{ParameterAxis, ParameterSpace};
use crate::spatial::SpatialError;

pub use pipeline::{
    decode_metric, normalize_stage, reference_mask, run_pipeline, segment_stage, Bindings,
    RoleBinding, SyntheticParams, SyntheticWorkflow, ROLES,
};
pub use scene::{Blob, SceneSpec, SyntheticScene, Tile};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("could only place {0} of {1} blobs without overlap")]
    ScenePlacement(usize, usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

fn int(name: &str, lo: i64, hi: i64, step: i64) -> ParameterAxis {
    ParameterAxis::integer(name, lo, hi, step).expect("preset axis")
}

fn cont(name: &str, lo: f64, hi: f64, step: f64) -> ParameterAxis {
    ParameterAxis::continuous(name, lo, hi, step).expect("preset axis")
}

fn conn(name: &str) -> ParameterAxis {
    ParameterAxis::categorical(name, ["4-conn", "8-conn"]).expect("preset axis")
}

/// Tuning space of the synthetic workflow (475,284,992 grid points).
pub fn synthetic_space() -> ParameterSpace {
    ParameterSpace::new(vec![
        int("threshold", 0, 255, 1),
        int("min_size", 0, 500, 5),
        int("max_size", 500, 5000, 50),
        conn("connectivity"),
        int("target_mean", 20, 120, 1),
    ])
    .expect("preset space")
}

/// The 15 parameters of a watershed-based nucleus segmentation.
pub fn watershed_space() -> ParameterSpace {
    ParameterSpace::new(vec![
        int("B", 210, 240, 10),
        int("G", 210, 240, 10),
        int("R", 210, 240, 10),
        cont("T1", 2.5, 7.5, 0.5),
        cont("T2", 2.5, 7.5, 0.5),
        int("G1", 5, 80, 5),
        int("G2", 2, 40, 2),
        int("MinSize", 2, 40, 2),
        int("MaxSize", 900, 1500, 50),
        int("MinSizePl", 5, 80, 5),
        int("MinSizeSeg", 2, 40, 2),
        int("MaxSizeSeg", 900, 1500, 50),
        conn("FillHoles"),
        conn("MorphRecon"),
        conn("Watershed"),
    ])
    .expect("preset space")
}

/// The 7 parameters of a level-set-based segmentation, including a dummy
/// axis that absorbs run-to-run variability.
pub fn levelset_space() -> ParameterSpace {
    ParameterSpace::new(vec![
        cont("OTSU", 0.3, 1.3, 0.1),
        cont("CW", 0.0, 1.0, 0.05),
        int("MinSize", 1, 20, 1),
        int("MaxSize", 50, 400, 5),
        int("MsKernel", 5, 30, 1),
        int("LevelSetIt", 5, 150, 1),
        int("Dummy", 1, 20, 1),
    ])
    .expect("preset space")
}

/// Watershed parameters kept for variance-based decomposition (k = 8).
pub fn watershed_vbd_space() -> ParameterSpace {
    ParameterSpace::new(vec![
        cont("T2", 2.5, 7.5, 0.5),
        int("G1", 5, 80, 5),
        int("G2", 2, 40, 2),
        int("MinSize", 2, 40, 2),
        int("MaxSize", 900, 1500, 50),
        int("MinSizePl", 5, 80, 5),
        int("MinSizeSeg", 2, 40, 2),
        conn("Recon"),
    ])
    .expect("preset space")
}

/// Level-set parameters kept for variance-based decomposition (k = 5).
pub fn levelset_vbd_space() -> ParameterSpace {
    ParameterSpace::new(vec![
        cont("OTSU", 0.3, 1.3, 0.1),
        cont("CW", 0.0, 1.0, 0.05),
        int("MinSize", 1, 20, 1),
        int("MsKernel", 5, 30, 1),
        int("LevelSetIt", 5, 150, 1),
    ])
    .expect("preset space")
}

/// Looks up a preset space by name.
pub fn preset_space(name: &str) -> Option<ParameterSpace> {
    Some(match name {
        "synthetic" => synthetic_space(),
        "watershed" => watershed_space(),
        "levelset" => levelset_space(),
        "watershed-vbd" => watershed_vbd_space(),
        "levelset-vbd" => levelset_vbd_space(),
        _ => return None,
    })
}

pub const PRESETS: [&str; 5] = [
    "synthetic",
    "watershed",
    "levelset",
    "watershed-vbd",
    "levelset-vbd",
];
