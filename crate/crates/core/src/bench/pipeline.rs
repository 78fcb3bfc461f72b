//! normalize → segment → compare stages and their executor.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BenchError, SyntheticScene, Tile};
use crate::graph::{StageCall, StageDecl, StageExecutor};
use crate::space::{AxisValue, ParamSet, ParameterSpace};
use crate::spatial::{
    compare, decode_pgm, encode_pgm, extract_objects, rasterize, Connectivity, Mask, MetricKind,
    ObjectMask,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub threshold: f64,
    pub min_size: usize,
    pub max_size: usize,
    pub connectivity: Connectivity,
    pub target_mean: f64,
}

impl Default for SyntheticParams {
    /// The generating parameters of the default benchmark.
    fn default() -> Self {
        Self {
            threshold: 120.0,
            min_size: 50,
            max_size: 3000,
            connectivity: Connectivity::Eight,
            target_mean: 60.0,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidParams(m));
        if !(0.0..=255.0).contains(&self.threshold) {
            return bad(format!("threshold {} outside [0, 255]", self.threshold));
        }
        if !(0.0..=255.0).contains(&self.target_mean) {
            return bad(format!("target mean {} outside [0, 255]", self.target_mean));
        }
        if self.min_size > self.max_size {
            return bad(format!(
                "min size {} exceeds max size {}",
                self.min_size, self.max_size
            ));
        }
        Ok(())
    }
}

/// Shifts intensities by the integer closest to `target - mean` (ties to
/// even), clamping to `[0, 255]`.
pub fn normalize_stage(tile: &Tile, target_mean: f64) -> Tile {
    let px = tile.pixels();
    let mean = px.iter().map(|&p| p as f64).sum::<f64>() / px.len() as f64;
    let shift = (target_mean - mean).round_ties_even() as i32;
    let out = px
        .iter()
        .map(|&p| (p as i32 + shift).clamp(0, 255) as u8)
        .collect();
    Mask::new(tile.width(), tile.height(), out).expect("same shape")
}

/// Thresholds (`pixel >= threshold`), labels components and keeps those
/// with `min_size <= area <= max_size`. Kept objects are renumbered.
pub fn segment_stage(tile: &Tile, params: &SyntheticParams) -> ObjectMask {
    let fg = Mask::from_fn(tile.width(), tile.height(), |x, y| {
        tile.get(x, y) as f64 >= params.threshold
    });
    let labeled = extract_objects(&fg, params.connectivity);
    let objects: Vec<_> = labeled
        .objects
        .into_iter()
        .filter(|o| (params.min_size..=params.max_size).contains(&o.area))
        .enumerate()
        .map(|(i, mut o)| {
            o.id = i as u32;
            o
        })
        .collect();
    ObjectMask {
        mask: rasterize(tile.width(), tile.height(), &objects),
        connectivity: params.connectivity,
        objects,
    }
}

pub fn run_pipeline(scene: &SyntheticScene, params: &SyntheticParams) -> ObjectMask {
    segment_stage(&normalize_stage(&scene.tile, params.target_mean), params)
}

pub fn reference_mask(
    scene: &SyntheticScene,
    p_star: &SyntheticParams,
) -> Result<ObjectMask, BenchError> {
    p_star.validate()?;
    Ok(run_pipeline(scene, p_star))
}

/// Parameter roles understood by the synthetic stages.
pub const ROLES: [&str; 5] = [
    "threshold",
    "min_size",
    "max_size",
    "connectivity",
    "target_mean",
];

/// Maps a parameter role to an axis: `value = offset + scale * axis value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RoleBinding {
    Axis(String),
    Affine {
        axis: String,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        offset: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl RoleBinding {
    pub fn axis(&self) -> &str {
        match self {
            RoleBinding::Axis(a) | RoleBinding::Affine { axis: a, .. } => a,
        }
    }

    fn apply(&self, v: &AxisValue) -> AxisValue {
        match (self, v) {
            (RoleBinding::Affine { scale, offset, .. }, AxisValue::Number(x)) => {
                AxisValue::Number(offset + scale * x)
            }
            _ => v.clone(),
        }
    }
}

/// Role → axis bindings. Roles without a binding read the axis named like
/// the role, if the space has one, and otherwise keep their default value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bindings(pub BTreeMap<String, RoleBinding>);

impl Bindings {
    pub fn validate(&self, space: &ParameterSpace) -> Result<(), BenchError> {
        for (role, b) in &self.0 {
            if !ROLES.contains(&role.as_str()) {
                return Err(BenchError::InvalidParams(format!(
                    "unknown role `{role}` (expected one of {})",
                    ROLES.join(", ")
                )));
            }
            if space.axis(b.axis()).is_none() {
                return Err(BenchError::InvalidParams(format!(
                    "role `{role}` bound to unknown axis `{}`",
                    b.axis()
                )));
            }
        }
        Ok(())
    }

    fn binding(&self, role: &str) -> RoleBinding {
        self.0
            .get(role)
            .cloned()
            .unwrap_or_else(|| RoleBinding::Axis(role.to_string()))
    }

    /// Axes of `space` that drive `role`.
    pub fn axis_for(&self, role: &str, space: &ParameterSpace) -> Option<String> {
        let b = self.binding(role);
        space.axis(b.axis()).map(|_| b.axis().to_string())
    }

    /// Resolves parameters from axis values, falling back to `defaults`.
    pub fn resolve(
        &self,
        defaults: &SyntheticParams,
        lookup: impl Fn(&str) -> Option<AxisValue>,
    ) -> Result<SyntheticParams, BenchError> {
        let get = |role: &str| {
            let b = self.binding(role);
            lookup(b.axis()).map(|v| b.apply(&v))
        };
        let number = |role: &str, v: AxisValue| {
            v.as_f64().ok_or_else(|| {
                BenchError::InvalidParams(format!("role `{role}` needs a numeric value, got `{v}`"))
            })
        };
        let size = |role: &str, v: AxisValue| -> Result<usize, BenchError> {
            let x = number(role, v)?;
            if x < 0.0 {
                return Err(BenchError::InvalidParams(format!(
                    "role `{role}` must be non-negative, got {x}"
                )));
            }
            Ok(x.round() as usize)
        };
        let mut p = *defaults;
        if let Some(v) = get("threshold") {
            p.threshold = number("threshold", v)?;
        }
        if let Some(v) = get("target_mean") {
            p.target_mean = number("target_mean", v)?;
        }
        if let Some(v) = get("min_size") {
            p.min_size = size("min_size", v)?;
        }
        if let Some(v) = get("max_size") {
            p.max_size = size("max_size", v)?;
        }
        if let Some(v) = get("connectivity") {
            p.connectivity = parse_connectivity(&v)?;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn resolve_set(
        &self,
        defaults: &SyntheticParams,
        space: &ParameterSpace,
        set: &ParamSet,
    ) -> Result<SyntheticParams, BenchError> {
        space
            .validate(set)
            .map_err(|e| BenchError::InvalidParams(e.to_string()))?;
        self.resolve(defaults, |axis| {
            space.axis(axis).and_then(|(i, a)| a.value(set.levels()[i]))
        })
    }
}

fn parse_connectivity(v: &AxisValue) -> Result<Connectivity, BenchError> {
    match v {
        AxisValue::Number(x) if *x == 4.0 => Ok(Connectivity::Four),
        AxisValue::Number(x) if *x == 8.0 => Ok(Connectivity::Eight),
        AxisValue::Label(s) if s == "4" || s == "4-conn" => Ok(Connectivity::Four),
        AxisValue::Label(s) if s == "8" || s == "8-conn" => Ok(Connectivity::Eight),
        other => Err(BenchError::InvalidParams(format!(
            "connectivity must be 4 or 8, got `{other}`"
        ))),
    }
}

/// Stage executor for the synthetic workflow. Stage kinds:
/// `normalize` (no inputs, emits the normalized tile as PGM), `segment`
/// (normalized tile in, mask PGM out) and `compare` (mask in, metric against
/// the reference out as 8 little-endian bytes of an `f64`).
#[derive(Debug, Clone)]
pub struct SyntheticWorkflow {
    pub scene: SyntheticScene,
    pub defaults: SyntheticParams,
    pub bindings: Bindings,
    pub reference: Mask,
    pub metric: MetricKind,
}

impl SyntheticWorkflow {
    /// Uses the pipeline output at `defaults` as the reference.
    pub fn self_referential(
        scene: SyntheticScene,
        defaults: SyntheticParams,
        metric: MetricKind,
    ) -> Result<Self, BenchError> {
        let reference = reference_mask(&scene, &defaults)?.mask;
        Ok(Self {
            scene,
            defaults,
            bindings: Bindings::default(),
            reference,
            metric,
        })
    }

    pub fn with_bindings(mut self, bindings: Bindings) -> Self {
        self.bindings = bindings;
        self
    }

    /// The standard three-stage chain: normalization consumes the axis bound
    /// to `target_mean`, segmentation the other bound axes.
    pub fn stages(&self, space: &ParameterSpace) -> Vec<StageDecl> {
        let norm_axis = self.bindings.axis_for("target_mean", space);
        let seg_axes: Vec<String> = ["threshold", "min_size", "max_size", "connectivity"]
            .iter()
            .filter_map(|r| self.bindings.axis_for(r, space))
            .filter(|a| Some(a) != norm_axis.as_ref())
            .fold(Vec::new(), |mut acc, a| {
                if !acc.contains(&a) {
                    acc.push(a);
                }
                acc
            });
        vec![
            StageDecl {
                name: "normalize".into(),
                kind: None,
                axes: norm_axis.into_iter().collect(),
                inputs: vec![],
                pure: true,
            },
            StageDecl {
                name: "segment".into(),
                kind: None,
                axes: seg_axes,
                inputs: vec!["normalize".into()],
                pure: true,
            },
            StageDecl {
                name: "compare".into(),
                kind: None,
                axes: vec![],
                inputs: vec!["segment".into()],
                pure: true,
            },
        ]
    }

    /// Metric of the pipeline at `params` against the reference.
    pub fn evaluate(&self, params: &SyntheticParams) -> Result<f64, BenchError> {
        params.validate()?;
        let out = run_pipeline(&self.scene, params);
        Ok(compare(self.metric, &out.mask, &self.reference)?.value)
    }

    fn params_of(&self, call: &StageCall<'_>) -> Result<SyntheticParams, BenchError> {
        self.bindings
            .resolve(&self.defaults, |axis| call.param(axis).cloned())
    }
}

pub fn decode_metric(bytes: &[u8]) -> Option<f64> {
    Some(f64::from_le_bytes(bytes.try_into().ok()?))
}

fn single_input<'a>(call: &'a StageCall<'_>) -> Result<&'a [u8], String> {
    match call.inputs {
        [one] => Ok(one),
        other => Err(format!(
            "stage `{}` expects one input, got {}",
            call.stage.name,
            other.len()
        )),
    }
}

impl StageExecutor for SyntheticWorkflow {
    fn execute(&self, call: &StageCall<'_>) -> Result<Vec<u8>, String> {
        let params = self.params_of(call).map_err(|e| e.to_string())?;
        match call.stage.kind() {
            "normalize" => Ok(encode_pgm(&normalize_stage(
                &self.scene.tile,
                params.target_mean,
            ))),
            "segment" => {
                let tile = decode_pgm(single_input(call)?).map_err(|e| e.to_string())?;
                Ok(encode_pgm(&segment_stage(&tile, &params).mask))
            }
            "compare" => {
                let mask = decode_pgm(single_input(call)?).map_err(|e| e.to_string())?;
                let v = compare(self.metric, &mask, &self.reference).map_err(|e| e.to_string())?;
                Ok(v.value.to_le_bytes().to_vec())
            }
            other => Err(format!("unknown stage kind `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{synthetic_space, SceneSpec};
    use crate::graph::{build_compact, execute_sequential, replay_equivalence, Workflow};
    use crate::spatial::{dice, pixel_diff};

    fn scene() -> SyntheticScene {
        SyntheticScene::render(&SceneSpec::default()).unwrap()
    }

    fn tile(px: Vec<u8>, w: usize) -> Tile {
        let h = px.len() / w;
        Mask::new(w, h, px).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let t = tile(vec![10, 20, 30, 40], 2);
        assert_eq!(normalize_stage(&t, 25.0), t);
        let z = tile(vec![0; 16], 4);
        assert!(normalize_stage(&z, 100.0)
            .pixels()
            .iter()
            .all(|&p| p == 100));
        let s = scene().tile;
        // idempotent whenever the first pass did not clamp
        let mut unclamped = 0;
        for target in [20.0, 60.0, 97.3, 120.0] {
            let once = normalize_stage(&s, target);
            if once.pixels().iter().all(|&p| p > 0 && p < 255) {
                unclamped += 1;
                assert_eq!(normalize_stage(&once, target), once);
            }
        }
        assert!(unclamped >= 2);
        // clamping at the top
        assert_eq!(
            normalize_stage(&tile(vec![250, 0], 2), 250.0).pixels(),
            &[255, 125]
        );
    }

    #[test]
    fn segment_examples() {
        let s = scene();
        let p = SyntheticParams::default();
        assert!(s.tile.pixels().iter().all(|&v| v < 255));
        let empty = segment_stage(
            &s.tile,
            &SyntheticParams {
                threshold: 255.0,
                ..p
            },
        );
        assert_eq!(empty.mask.foreground_count(), 0);
        let at_p = run_pipeline(&s, &p);
        assert_eq!(at_p.objects.len(), s.blobs.len());
        let largest = at_p.objects.iter().map(|o| o.area).max().unwrap();
        let filtered = run_pipeline(
            &s,
            &SyntheticParams {
                min_size: largest + 1,
                max_size: largest + 1,
                ..p
            },
        );
        assert!(filtered.objects.is_empty());
        assert!(at_p.mask.pixels().iter().all(|&v| v == 0 || v == 255));
    }

    #[test]
    fn three_blob_scene_yields_three_objects() {
        let s = SyntheticScene::render(&SceneSpec {
            blobs: 3,
            seed: 11,
            ..SceneSpec::default()
        })
        .unwrap();
        assert_eq!(
            run_pipeline(&s, &SyntheticParams::default()).objects.len(),
            3
        );
    }

    #[test]
    fn reference_examples() {
        let s = scene();
        let p = SyntheticParams::default();
        let reference = reference_mask(&s, &p).unwrap();
        let out = run_pipeline(&s, &p);
        assert_eq!(dice(&out.mask, &reference.mask).unwrap().value, 1.0);
        assert_eq!(pixel_diff(&out.mask, &reference.mask).unwrap().value, 0.0);
        let far = run_pipeline(
            &s,
            &SyntheticParams {
                threshold: 220.0,
                ..p
            },
        );
        assert!(dice(&far.mask, &reference.mask).unwrap().value < 1.0);
        let far = run_pipeline(
            &s,
            &SyntheticParams {
                threshold: 20.0,
                ..p
            },
        );
        assert!(dice(&far.mask, &reference.mask).unwrap().value < 1.0);
        assert!(reference_mask(
            &s,
            &SyntheticParams {
                min_size: 10,
                max_size: 5,
                ..p
            }
        )
        .is_err());
    }

    #[test]
    fn dice_peaks_at_generating_threshold() {
        let wf = SyntheticWorkflow::self_referential(
            scene(),
            SyntheticParams::default(),
            MetricKind::Dice,
        )
        .unwrap();
        let at = |t: f64| {
            wf.evaluate(&SyntheticParams {
                threshold: t,
                ..SyntheticParams::default()
            })
            .unwrap()
        };
        assert_eq!(at(120.0), 1.0);
        assert!(at(110.0) < 1.0 && at(130.0) < 1.0);
        assert!(at(100.0) <= at(110.0) && at(140.0) <= at(130.0));
    }

    #[test]
    fn bindings_resolve_roles() {
        let space = synthetic_space();
        let d = SyntheticParams::default();
        let b = Bindings::default();
        let set = space.center();
        let p = b.resolve_set(&d, &space, &set).unwrap();
        assert_eq!(p.threshold, 127.0);
        assert_eq!(p.connectivity, Connectivity::Four);
        let json = r#"{"threshold": {"axis": "target_mean", "scale": 2, "offset": 1}, "min_size": "max_size"}"#;
        let b: Bindings = serde_json::from_str(json).unwrap();
        b.validate(&space).unwrap();
        let p = b
            .resolve(&d, |a| match a {
                "target_mean" => Some(AxisValue::Number(30.0)),
                "max_size" => Some(AxisValue::Number(700.0)),
                _ => None,
            })
            .unwrap();
        // unbound roles read the axis named like the role
        assert_eq!(
            (p.threshold, p.min_size, p.max_size, p.target_mean),
            (61.0, 700, 700, 30.0)
        );
        let bad: Bindings = serde_json::from_str(r#"{"speed": "threshold"}"#).unwrap();
        assert!(bad.validate(&space).is_err());
    }

    #[test]
    fn stages_are_pure_and_match_direct_evaluation() {
        let space = synthetic_space();
        let wf = SyntheticWorkflow::self_referential(
            scene(),
            SyntheticParams::default(),
            MetricKind::Dice,
        )
        .unwrap();
        let workflow = Workflow::new(space.clone(), wf.stages(&space)).unwrap();
        assert_eq!(workflow.stages()[0].axes, vec!["target_mean"]);
        assert_eq!(workflow.stages()[1].axes.len(), 4);
        let sets: Vec<ParamSet> = (0..8)
            .map(|i| {
                let mut s = space.center();
                s.levels_mut()[0] = 100 + 5 * i;
                s.levels_mut()[1] = i % 3;
                s
            })
            .collect();
        assert!(replay_equivalence(&workflow, &sets, &wf).unwrap());
        let g = build_compact(&workflow, &sets).unwrap();
        assert_eq!(g.stage_vertex_count(), 1 + 8 + 8);
        let run = execute_sequential(&g, &wf).unwrap();
        for (i, set) in sets.iter().enumerate() {
            let p = wf.bindings.resolve_set(&wf.defaults, &space, set).unwrap();
            let via_graph = decode_metric(run.output_for(&g, i, 2).unwrap()).unwrap();
            assert_eq!(via_graph, wf.evaluate(&p).unwrap());
        }
    }
}
