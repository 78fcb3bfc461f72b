//! Seeded synthetic tiles: soft-edged bright discs on a noisy background.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::rng::seeded;
use crate::spatial::Mask;

/// Grayscale tiles share the 8-bit raster type used for masks.
pub type Tile = Mask;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub blobs: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    pub intensity_min: u8,
    pub intensity_max: u8,
    pub background: u8,
    /// Per-pixel noise amplitude; values are drawn from `[-noise, noise]`.
    pub noise: u8,
    /// Width of the linear intensity ramp at disc borders, in pixels.
    pub edge: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            width: 192,
            height: 192,
            blobs: 12,
            radius_min: 10.0,
            radius_max: 20.0,
            intensity_min: 150,
            intensity_max: 230,
            background: 40,
            noise: 6,
            edge: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Blob {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub peak: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub spec: SceneSpec,
    pub blobs: Vec<Blob>,
    pub tile: Tile,
}

const PLACEMENT_ATTEMPTS: usize = 10_000;

impl SyntheticScene {
    pub fn render(spec: &SceneSpec) -> Result<Self, BenchError> {
        let bad = |m: &str| Err(BenchError::InvalidScene(m.to_string()));
        if spec.width == 0 || spec.height == 0 {
            return bad("tile must not be empty");
        }
        if !(spec.radius_min > 0.0 && spec.radius_min <= spec.radius_max) {
            return bad("need 0 < radius_min <= radius_max");
        }
        if spec.intensity_min > spec.intensity_max {
            return bad("intensity_min exceeds intensity_max");
        }
        if !(spec.edge >= 0.0 && spec.edge.is_finite()) {
            return bad("edge must be finite and non-negative");
        }
        let mut rng = seeded(spec.seed);
        let margin = spec.edge / 2.0 + 1.0;
        let mut blobs: Vec<Blob> = Vec::with_capacity(spec.blobs);
        for _ in 0..spec.blobs {
            let mut placed = None;
            for _ in 0..PLACEMENT_ATTEMPTS {
                let radius = rng.random_range(spec.radius_min..=spec.radius_max);
                let reach = radius + margin;
                let (xmax, ymax) = (
                    spec.width as f64 - 1.0 - reach,
                    spec.height as f64 - 1.0 - reach,
                );
                if xmax < reach || ymax < reach {
                    break;
                }
                let cx = rng.random_range(reach..=xmax);
                let cy = rng.random_range(reach..=ymax);
                let clear = blobs.iter().all(|b| {
                    let d = ((b.cx - cx).powi(2) + (b.cy - cy).powi(2)).sqrt();
                    d >= b.radius + radius + 2.0 * margin + 1.0
                });
                if clear {
                    let peak = rng.random_range(spec.intensity_min..=spec.intensity_max);
                    placed = Some(Blob {
                        cx,
                        cy,
                        radius,
                        peak,
                    });
                    break;
                }
            }
            match placed {
                Some(b) => blobs.push(b),
                None => return Err(BenchError::ScenePlacement(blobs.len(), spec.blobs)),
            }
        }

        let mut pixels = Vec::with_capacity(spec.width * spec.height);
        let bg = spec.background as f64;
        for y in 0..spec.height {
            for x in 0..spec.width {
                let mut v = bg;
                for b in &blobs {
                    let d = ((x as f64 - b.cx).powi(2) + (y as f64 - b.cy).powi(2)).sqrt();
                    let cover = coverage(d, b.radius, spec.edge);
                    if cover > 0.0 {
                        v = bg + (b.peak as f64 - bg) * cover;
                    }
                }
                let n = spec.noise as i32;
                let noise = if n > 0 { rng.random_range(-n..=n) } else { 0 };
                pixels.push((v.round() as i32 + noise).clamp(0, 255) as u8);
            }
        }
        let tile = Mask::new(spec.width, spec.height, pixels).map_err(BenchError::Spatial)?;
        Ok(Self {
            spec: spec.clone(),
            blobs,
            tile,
        })
    }
}

/// Fraction of the disc intensity at distance `d` from the centre: one
/// inside `radius - edge/2`, zero beyond `radius + edge/2`, linear between.
fn coverage(d: f64, radius: f64, edge: f64) -> f64 {
    if edge == 0.0 {
        return if d <= radius { 1.0 } else { 0.0 };
    }
    ((radius + edge / 2.0 - d) / edge).clamp(0.0, 1.0)
}
