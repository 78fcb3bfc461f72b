//! Parameter axes, grid discretization and unit scaling.
//!
//! Every axis is a finite, ordered lattice of levels. Continuous ranges are
//! represented only through their grid, so a point in the search space is a
//! vector of level indices ([`ParamSet`]). Sensitivity analysis and the
//! tuners work in the unit cube, where level `i` of an `L`-level axis sits at
//! `i / (L - 1)`.

use std::collections::HashSet;
use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when checking that a range is a multiple of its step.
const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("axis `{name}`: {reason}")]
    InvalidAxis { name: String, reason: String },
    #[error("duplicate axis name `{0}`")]
    DuplicateAxis(String),
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("invalid parameter set: {0}")]
    InvalidParamSet(String),
    #[error("design must contain at least one point")]
    EmptyDesign,
    #[error("design infeasible on axis `{axis}`: {reason}")]
    DesignInfeasible { axis: String, reason: String },
    #[error("invalid design argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisKind {
    ContinuousGrid { lo: f64, hi: f64, step: f64 },
    IntegerGrid { lo: i64, hi: i64, step: i64 },
    Categorical { categories: Vec<String> },
}

/// The value an axis takes at one of its levels.
#[derive(Debug, Clone, PartialEq)]
pub enum AxisValue {
    Number(f64),
    Label(String),
}

impl AxisValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AxisValue::Number(v) => Some(*v),
            AxisValue::Label(_) => None,
        }
    }
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisValue::Number(v) => write!(f, "{v}"),
            AxisValue::Label(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterAxis {
    name: String,
    kind: AxisKind,
}

impl ParameterAxis {
    pub fn continuous(
        name: impl Into<String>,
        lo: f64,
        hi: f64,
        step: f64,
    ) -> Result<Self, SpaceError> {
        Self::new(name, AxisKind::ContinuousGrid { lo, hi, step })
    }

    pub fn integer(
        name: impl Into<String>,
        lo: i64,
        hi: i64,
        step: i64,
    ) -> Result<Self, SpaceError> {
        Self::new(name, AxisKind::IntegerGrid { lo, hi, step })
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Result<Self, SpaceError> {
        let categories = categories.into_iter().map(Into::into).collect();
        Self::new(name, AxisKind::Categorical { categories })
    }

    pub fn new(name: impl Into<String>, kind: AxisKind) -> Result<Self, SpaceError> {
        let name = name.into();
        let invalid = |reason: &str| SpaceError::InvalidAxis {
            name: name.clone(),
            reason: reason.to_string(),
        };
        if name.is_empty() {
            return Err(invalid("empty name"));
        }
        match &kind {
            AxisKind::ContinuousGrid { lo, hi, step } => {
                if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
                    return Err(invalid("bounds and step must be finite"));
                }
                if *step <= 0.0 {
                    return Err(invalid("step must be positive"));
                }
                if lo > hi {
                    return Err(invalid("lo must not exceed hi"));
                }
                let ratio = (hi - lo) / step;
                if (ratio - ratio.round()).abs() > GRID_TOLERANCE * ratio.abs().max(1.0) {
                    return Err(invalid("range is not a multiple of step"));
                }
            }
            AxisKind::IntegerGrid { lo, hi, step } => {
                if *step <= 0 {
                    return Err(invalid("step must be positive"));
                }
                if lo > hi {
                    return Err(invalid("lo must not exceed hi"));
                }
                if (hi - lo) % step != 0 {
                    return Err(invalid("range is not a multiple of step"));
                }
            }
            AxisKind::Categorical { categories } => {
                let unique: HashSet<&String> = categories.iter().collect();
                if unique.len() != categories.len() {
                    return Err(invalid("duplicate category labels"));
                }
            }
        }
        let axis = Self {
            name: name.clone(),
            kind,
        };
        if axis.level_count() < 2 {
            return Err(invalid("axis needs at least two levels"));
        }
        Ok(axis)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &AxisKind {
        &self.kind
    }

    pub fn level_count(&self) -> usize {
        match &self.kind {
            AxisKind::ContinuousGrid { lo, hi, step } => ((hi - lo) / step).round() as usize + 1,
            AxisKind::IntegerGrid { lo, hi, step } => ((hi - lo) / step) as usize + 1,
            AxisKind::Categorical { categories } => categories.len(),
        }
    }

    /// Value at `level`. Continuous values are rounded to 1e-9 so that keys
    /// do not carry floating-point noise such as `0.30000000000000004`.
    pub fn value(&self, level: usize) -> Option<AxisValue> {
        if level >= self.level_count() {
            return None;
        }
        Some(match &self.kind {
            AxisKind::ContinuousGrid { lo, step, .. } => {
                let v = lo + level as f64 * step;
                AxisValue::Number((v * 1e9).round() / 1e9)
            }
            AxisKind::IntegerGrid { lo, step, .. } => {
                AxisValue::Number((lo + level as i64 * step) as f64)
            }
            AxisKind::Categorical { categories } => AxisValue::Label(categories[level].clone()),
        })
    }

    /// Level whose value is nearest to `value` (numeric axes) or whose label
    /// matches (categorical axes).
    pub fn level_of(&self, value: &AxisValue) -> Option<usize> {
        match (&self.kind, value) {
            (AxisKind::Categorical { categories }, AxisValue::Label(l)) => {
                categories.iter().position(|c| c == l)
            }
            (AxisKind::ContinuousGrid { lo, step, .. }, AxisValue::Number(v)) => {
                let i = ((v - lo) / step).round();
                (i >= 0.0 && (i as usize) < self.level_count()).then_some(i as usize)
            }
            (AxisKind::IntegerGrid { lo, step, .. }, AxisValue::Number(v)) => {
                let i = ((v - *lo as f64) / *step as f64).round();
                (i >= 0.0 && (i as usize) < self.level_count()).then_some(i as usize)
            }
            _ => None,
        }
    }

    /// Unit-space coordinate of `level`.
    pub fn unit(&self, level: usize) -> f64 {
        level as f64 / (self.level_count() - 1) as f64
    }

    /// Nearest level to a unit-space coordinate, clamped to the axis range.
    pub fn nearest_level(&self, u: f64) -> usize {
        let last = self.level_count() - 1;
        if !u.is_finite() {
            return if u == f64::INFINITY { last } else { 0 };
        }
        let i = (u * last as f64).round();
        i.clamp(0.0, last as f64) as usize
    }
}

/// Ordered collection of uniquely named axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    axes: Vec<ParameterAxis>,
}

impl ParameterSpace {
    pub fn new(axes: Vec<ParameterAxis>) -> Result<Self, SpaceError> {
        let mut seen = HashSet::new();
        for axis in &axes {
            if !seen.insert(axis.name.clone()) {
                return Err(SpaceError::DuplicateAxis(axis.name.clone()));
            }
        }
        Ok(Self { axes })
    }

    pub fn axes(&self) -> &[ParameterAxis] {
        &self.axes
    }

    pub fn k(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, name: &str) -> Option<(usize, &ParameterAxis)> {
        self.axes.iter().enumerate().find(|(_, a)| a.name == name)
    }

    pub fn axis_index(&self, name: &str) -> Result<usize, SpaceError> {
        self.axis(name)
            .map(|(i, _)| i)
            .ok_or_else(|| SpaceError::UnknownAxis(name.to_string()))
    }

    /// Exact number of grid points, the product of all level counts.
    pub fn grid_size(&self) -> BigUint {
        self.axes.iter().fold(BigUint::from(1u32), |acc, a| {
            acc * BigUint::from(a.level_count())
        })
    }

    /// Grid size as a float, for fraction-of-space reporting.
    pub fn grid_size_f64(&self) -> f64 {
        self.axes.iter().map(|a| a.level_count() as f64).product()
    }

    pub fn validate(&self, p: &ParamSet) -> Result<(), SpaceError> {
        if p.levels().len() != self.k() {
            return Err(SpaceError::InvalidParamSet(format!(
                "expected {} levels, got {}",
                self.k(),
                p.levels().len()
            )));
        }
        for (axis, &level) in self.axes.iter().zip(p.levels()) {
            if level >= axis.level_count() {
                return Err(SpaceError::InvalidParamSet(format!(
                    "level {level} out of range for axis `{}` ({} levels)",
                    axis.name,
                    axis.level_count()
                )));
            }
        }
        Ok(())
    }

    /// Canonical textual key, `name=value` pairs in axis order.
    pub fn key(&self, p: &ParamSet) -> String {
        self.axes
            .iter()
            .zip(p.levels())
            .map(|(axis, &level)| match axis.value(level) {
                Some(v) => format!("{}={}", axis.name, v),
                None => format!("{}=#{}", axis.name, level),
            })
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn values(&self, p: &ParamSet) -> Result<Vec<AxisValue>, SpaceError> {
        self.validate(p)?;
        Ok(self
            .axes
            .iter()
            .zip(p.levels())
            .map(|(a, &l)| a.value(l).expect("validated"))
            .collect())
    }

    /// Centre of the grid (lower middle level on even axes).
    pub fn center(&self) -> ParamSet {
        ParamSet::new(
            self.axes
                .iter()
                .map(|a| (a.level_count() - 1) / 2)
                .collect(),
        )
    }
}

/// A point of the search grid: one level index per axis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamSet(Vec<usize>);

impl ParamSet {
    pub fn new(levels: Vec<usize>) -> Self {
        Self(levels)
    }

    pub fn levels(&self) -> &[usize] {
        &self.0
    }

    pub fn levels_mut(&mut self) -> &mut [usize] {
        &mut self.0
    }

    pub fn into_levels(self) -> Vec<usize> {
        self.0
    }
}

/// Maps each level index to `i / (L - 1)`.
pub fn scale_to_unit(space: &ParameterSpace, p: &ParamSet) -> Result<Vec<f64>, SpaceError> {
    space.validate(p)?;
    Ok(space
        .axes
        .iter()
        .zip(p.levels())
        .map(|(a, &l)| a.unit(l))
        .collect())
}

/// Inverse of [`scale_to_unit`]: nearest level per axis, clamped into range.
pub fn unit_to_paramset(space: &ParameterSpace, u: &[f64]) -> ParamSet {
    ParamSet::new(
        space
            .axes
            .iter()
            .zip(u)
            .map(|(a, &x)| a.nearest_level(x))
            .collect(),
    )
}

/// Axis declaration as written in a study config: either a numeric grid
/// `{name, kind, lo, hi, step}` or `{name, categories}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub name: String,
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub categories: Option<Vec<String>>,
}

impl TryFrom<&AxisSpec> for ParameterAxis {
    type Error = SpaceError;

    fn try_from(spec: &AxisSpec) -> Result<Self, Self::Error> {
        let invalid = |reason: &str| SpaceError::InvalidAxis {
            name: spec.name.clone(),
            reason: reason.to_string(),
        };
        if let Some(categories) = &spec.categories {
            if spec.kind.as_deref().is_some_and(|k| k != "categorical") {
                return Err(invalid("categories given for a numeric axis"));
            }
            return ParameterAxis::categorical(spec.name.clone(), categories.clone());
        }
        let (lo, hi, step) = match (spec.lo, spec.hi, spec.step) {
            (Some(lo), Some(hi), Some(step)) => (lo, hi, step),
            _ => return Err(invalid("numeric axis needs lo, hi and step")),
        };
        match spec.kind.as_deref().unwrap_or("continuous") {
            "continuous" | "continuous-grid" => {
                ParameterAxis::continuous(spec.name.clone(), lo, hi, step)
            }
            "integer" | "integer-grid" => {
                if [lo, hi, step].iter().any(|v| v.fract() != 0.0) {
                    return Err(invalid("integer axis needs integral lo, hi and step"));
                }
                ParameterAxis::integer(spec.name.clone(), lo as i64, hi as i64, step as i64)
            }
            other => Err(invalid(&format!("unknown axis kind `{other}`"))),
        }
    }
}
