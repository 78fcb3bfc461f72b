//! Study configuration: one JSON document with the sections `space`,
//! `workflow`, `method`, `runtime`, `storage` and `output`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use paramstudy_core::bench::{
    preset_space, Bindings, SceneSpec, SyntheticParams, SyntheticScene, SyntheticWorkflow, PRESETS,
};
use paramstudy_core::runtime::{RuntimeConfig, SchedulerKind, StorageConfig};
use paramstudy_core::spatial::{read_pgm, MetricKind};
use paramstudy_core::tune::TuneConfig;
use paramstudy_core::{AxisValue, ParamSet, ParameterAxis, ParameterSpace};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct StudyConfig {
    pub space: SpaceConfig,
    #[serde(default)]
    pub workflow: WorkflowConfig,
    pub method: MethodConfig,
    #[serde(default)]
    pub runtime: RuntimeConfig,
    /// Storage hierarchy; overrides `runtime.storage` when given.
    #[serde(default)]
    pub storage: Option<StorageConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
    /// Parameter sets merged into one compact graph per runtime execution.
    #[serde(default = "default_batch")]
    pub batch: usize,
}

fn default_batch() -> usize {
    64
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SpaceConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub axes: Option<Vec<AxisSpec>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AxisSpec {
    Continuous {
        name: String,
        min: f64,
        max: f64,
        step: f64,
    },
    Integer {
        name: String,
        min: i64,
        max: i64,
        step: i64,
    },
    Categorical {
        name: String,
        values: Vec<String>,
    },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct WorkflowConfig {
    #[serde(default)]
    pub scene: SceneSpec,
    /// Parameter values for roles not bound to an axis; also the
    /// default-parameter reference.
    #[serde(default)]
    pub defaults: SyntheticParams,
    #[serde(default)]
    pub bindings: Bindings,
    #[serde(default)]
    pub reference: Reference,
    #[serde(default = "default_metric")]
    pub metric: MetricKind,
}

fn default_metric() -> MetricKind {
    MetricKind::Dice
}

impl Default for WorkflowConfig {
    fn default() -> Self {
        Self {
            scene: SceneSpec::default(),
            defaults: SyntheticParams::default(),
            bindings: Bindings::default(),
            reference: Reference::default(),
            metric: default_metric(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Reference {
    /// The pipeline output at the workflow defaults.
    #[default]
    DefaultParams,
    /// A PGM mask file, relative to the config file.
    Mask(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    Lhs,
    MonteCarlo,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MethodConfig {
    Moat {
        r: usize,
        #[serde(default)]
        p: Option<usize>,
    },
    Correlate {
        #[serde(default = "default_sampling")]
        sample: Sampling,
        n: usize,
    },
    Vbd {
        n: usize,
    },
    Tune {
        tuner: TuneConfig,
    },
    Run {
        /// Axis name → value per point; missing axes take the grid centre.
        #[serde(default)]
        points: Vec<BTreeMap<String, serde_json::Value>>,
    },
}

fn default_sampling() -> Sampling {
    Sampling::Lhs
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Moat { .. } => "moat",
            MethodConfig::Correlate { .. } => "correlate",
            MethodConfig::Vbd { .. } => "vbd",
            MethodConfig::Tune { .. } => "tune",
            MethodConfig::Run { .. } => "run",
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    /// Write the runtime event log as `events.csv`.
    #[serde(default = "yes")]
    pub events: bool,
    /// `run` only: write each point's mask as PGM.
    #[serde(default)]
    pub masks: bool,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out(),
            events: true,
            masks: false,
        }
    }
}

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub scheduler: Option<SchedulerKind>,
    pub batch: Option<usize>,
    pub out: Option<PathBuf>,
}

/// A validated study, ready to run.
#[derive(Debug, Clone)]
pub struct Study {
    pub config: StudyConfig,
    pub space: ParameterSpace,
    pub workflow: SyntheticWorkflow,
    pub runtime: RuntimeConfig,
}

/// Reads and validates a config. Syntax and schema errors carry the line
/// and column of the offending JSON.
pub fn load(path: &Path, overrides: &Overrides) -> Result<Study, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut config: StudyConfig = serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    apply_overrides(&mut config, overrides);
    build(config, base)
}

fn apply_overrides(config: &mut StudyConfig, o: &Overrides) {
    if let Some(s) = o.seed {
        config.seed = s;
    }
    if let Some(w) = o.workers {
        config.runtime.workers = w;
    }
    if let Some(s) = o.scheduler {
        config.runtime.scheduler = s;
    }
    if let Some(b) = o.batch {
        config.batch = b;
    }
    if let Some(d) = &o.out {
        config.output.dir = d.clone();
    }
}

pub fn build(mut config: StudyConfig, base: &Path) -> Result<Study, CliError> {
    let bad = |m: String| CliError::Config(m);
    let space = build_space(&config.space)?;
    if config.batch == 0 {
        return Err(bad("batch must be positive".into()));
    }
    if let Some(s) = &config.storage {
        config.runtime.storage = s.clone();
    }
    config
        .runtime
        .storage
        .validate()
        .map_err(|e| bad(e.to_string()))?;
    if config.runtime.workers == 0 {
        return Err(bad("runtime.workers must be positive".into()));
    }
    if let MethodConfig::Tune { tuner } = &mut config.method {
        tuner.seed = config.seed;
        tuner.validate(&space).map_err(|e| bad(e.to_string()))?;
    }

    let wf = &config.workflow;
    wf.bindings
        .validate(&space)
        .map_err(|e| bad(format!("workflow.bindings: {e}")))?;
    wf.defaults
        .validate()
        .map_err(|e| bad(format!("workflow.defaults: {e}")))?;
    let scene =
        SyntheticScene::render(&wf.scene).map_err(|e| bad(format!("workflow.scene: {e}")))?;
    let mut workflow = SyntheticWorkflow::self_referential(scene, wf.defaults, wf.metric)
        .map_err(|e| bad(format!("workflow: {e}")))?
        .with_bindings(wf.bindings.clone());
    if let Reference::Mask(p) = &wf.reference {
        let path = base.join(p);
        let mask = read_pgm(&path)
            .map_err(|e| bad(format!("workflow.reference: {}: {e}", path.display())))?;
        if (mask.width(), mask.height()) != (wf.scene.width, wf.scene.height) {
            return Err(bad(format!(
                "workflow.reference: mask is {}x{}, scene is {}x{}",
                mask.width(),
                mask.height(),
                wf.scene.width,
                wf.scene.height
            )));
        }
        workflow.reference = mask;
    }
    if let MethodConfig::Run { points } = &config.method {
        for (i, p) in points.iter().enumerate() {
            point_from_values(&space, p).map_err(|e| bad(format!("method.points[{i}]: {e}")))?;
        }
    }
    let runtime = config.runtime.clone();
    Ok(Study {
        config,
        space,
        workflow,
        runtime,
    })
}

fn build_space(cfg: &SpaceConfig) -> Result<ParameterSpace, CliError> {
    let bad = |m: String| CliError::Config(format!("space: {m}"));
    match (&cfg.preset, &cfg.axes) {
        (Some(name), None) => preset_space(name).ok_or_else(|| {
            bad(format!(
                "unknown preset `{name}` (expected one of {})",
                PRESETS.join(", ")
            ))
        }),
        (None, Some(axes)) => {
            let axes = axes
                .iter()
                .map(|a| match a {
                    AxisSpec::Continuous {
                        name,
                        min,
                        max,
                        step,
                    } => ParameterAxis::continuous(name.as_str(), *min, *max, *step),
                    AxisSpec::Integer {
                        name,
                        min,
                        max,
                        step,
                    } => ParameterAxis::integer(name.as_str(), *min, *max, *step),
                    AxisSpec::Categorical { name, values } => {
                        ParameterAxis::categorical(name.as_str(), values.clone())
                    }
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| bad(e.to_string()))?;
            ParameterSpace::new(axes).map_err(|e| bad(e.to_string()))
        }
        _ => Err(bad("give exactly one of `preset` or `axes`".into())),
    }
}

/// Grid point from axis values given by name; unnamed axes take the centre.
pub fn point_from_values(
    space: &ParameterSpace,
    values: &BTreeMap<String, serde_json::Value>,
) -> Result<ParamSet, String> {
    let mut p = space.center();
    for (name, v) in values {
        let (i, axis) = space
            .axis(name)
            .ok_or_else(|| format!("unknown axis `{name}`"))?;
        let value = match v {
            serde_json::Value::Number(n) => AxisValue::Number(n.as_f64().ok_or("bad number")?),
            serde_json::Value::String(s) => AxisValue::Label(s.clone()),
            other => return Err(format!("axis `{name}`: unsupported value {other}")),
        };
        p.levels_mut()[i] = axis
            .level_of(&value)
            .ok_or_else(|| format!("axis `{name}`: {value} is not on the grid"))?;
    }
    Ok(p)
}
