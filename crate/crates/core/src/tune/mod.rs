//! Black-box search over the parameter grid.
//!
//! Tuners follow an ask/tell protocol ([`Tuner::propose`] and
//! [`Tuner::update`]) so that a batch of proposals can be evaluated
//! concurrently, e.g. as one compact graph on the runtime. The [`tune`]
//! driver adds memoization, budget accounting, stop rules and the trace.
//! Tuners always maximize a score; minimization is handled by negation in
//! the driver.

mod ga;
mod nm;
mod pro;

use std::collections::HashMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{scale_to_unit, unit_to_paramset, ParamSet, ParameterSpace};

pub use ga::{crossover, ga_step, GaConfig, Genetic};
pub use nm::{nm_step, NelderMead};
pub use pro::{pro_step, Pro, ProMove};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TuneError {
    #[error("invalid tuning config: {0}")]
    InvalidConfig(String),
    #[error("objective returned {got} results for {expected} points")]
    ObjectiveContract { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    NelderMead,
    Pro,
    Ga,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::NelderMead => "nelder-mead",
            Variant::Pro => "pro",
            Variant::Ga => "ga",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Maximize,
    Minimize,
}

fn default_budget() -> usize {
    100
}

fn default_max_iterations() -> usize {
    1000
}

fn default_initial_step() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TuneConfig {
    pub variant: Variant,
    /// Maximum number of objective evaluations.
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Maximum number of propose/update rounds.
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Stop once the best value reaches this metric value.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub direction: Direction,
    #[serde(default)]
    pub seed: u64,
    /// Unit-space offset of the initial simplex vertices from the centre.
    #[serde(default = "default_initial_step")]
    pub initial_step: f64,
    /// PRO simplex size K; defaults to k + 1.
    #[serde(default)]
    pub pro_points: Option<usize>,
    #[serde(default)]
    pub ga: GaConfig,
}

impl TuneConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            budget: default_budget(),
            max_iterations: default_max_iterations(),
            threshold: None,
            direction: Direction::Maximize,
            seed: 0,
            initial_step: default_initial_step(),
            pro_points: None,
            ga: GaConfig::default(),
        }
    }

    pub fn validate(&self, space: &ParameterSpace) -> Result<(), TuneError> {
        let bad = |m: String| Err(TuneError::InvalidConfig(m));
        if self.budget == 0 {
            return bad("budget must be positive".into());
        }
        if self.max_iterations == 0 {
            return bad("max-iterations must be positive".into());
        }
        if !(self.initial_step > 0.0 && self.initial_step <= 1.0) {
            return bad(format!("initial-step {} outside (0, 1]", self.initial_step));
        }
        if let Some(t) = self.threshold {
            if !t.is_finite() {
                return bad("threshold must be finite".into());
            }
        }
        if let Some(k) = self.pro_points {
            if k < space.k() + 1 {
                return bad(format!(
                    "PRO needs at least k + 1 = {} points, got {k}",
                    space.k() + 1
                ));
            }
        }
        self.ga.validate()
    }
}

/// What a tuner wants evaluated next.
#[derive(Debug, Clone, PartialEq)]
pub enum Proposal {
    Batch(Vec<ParamSet>),
    /// The search has converged or run its course.
    Done,
}

pub trait Tuner {
    fn propose(&mut self) -> Proposal;
    /// Scores for the last batch, in proposal order; larger is better and
    /// failed evaluations are `-inf`.
    fn update(&mut self, scores: &[f64]);
    fn flags(&self) -> Vec<String> {
        Vec::new()
    }
}

pub fn make_tuner(
    space: &ParameterSpace,
    config: &TuneConfig,
) -> Result<Box<dyn Tuner>, TuneError> {
    config.validate(space)?;
    Ok(match config.variant {
        Variant::NelderMead => Box::new(NelderMead::new(space.clone(), config.initial_step)),
        Variant::Pro => Box::new(Pro::new(
            space.clone(),
            config.pro_points.unwrap_or(space.k() + 1),
            config.initial_step,
        )),
        Variant::Ga => Box::new(Genetic::new(space.clone(), config.ga.clone(), config.seed)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIterations,
    Threshold,
    Budget,
    Converged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub params: ParamSet,
    pub key: String,
    /// Metric value; `None` when the evaluation failed.
    pub value: Option<f64>,
    /// Served from the memo table without calling the objective.
    pub cached: bool,
    /// Best metric value so far, after this row.
    pub best: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub variant: Variant,
    pub direction: Direction,
    pub best: Option<ParamSet>,
    pub best_key: Option<String>,
    pub best_value: Option<f64>,
    /// Objective evaluations performed (memo hits excluded).
    pub evaluations: usize,
    pub iterations: usize,
    pub stop: StopReason,
    pub grid_size: f64,
    /// `evaluations / grid size`, in percent.
    pub fraction_visited_percent: f64,
    pub flags: Vec<String>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

impl TuneResult {
    pub fn write_trace_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "iteration,paramset,value,cached,best")?;
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.trace {
            writeln!(
                out,
                "{},\"{}\",{},{},{}",
                r.iteration,
                r.key.replace('"', "\"\""),
                f(r.value),
                r.cached,
                f(r.best)
            )?;
        }
        Ok(())
    }
}

/// Runs a tuner against a batch objective. The objective receives only
/// points that have not been evaluated before and returns one result per
/// point; errors and non-finite values are scored as the worst possible
/// value and flagged.
pub fn tune<F>(
    space: &ParameterSpace,
    config: &TuneConfig,
    mut objective: F,
) -> Result<TuneResult, TuneError>
where
    F: FnMut(&[ParamSet]) -> Vec<Result<f64, String>>,
{
    let mut tuner = make_tuner(space, config)?;
    let sign = match config.direction {
        Direction::Maximize => 1.0,
        Direction::Minimize => -1.0,
    };
    let mut memo: HashMap<ParamSet, Option<f64>> = HashMap::new();
    let mut trace = Vec::new();
    let mut flags = Vec::new();
    let mut evaluations = 0;
    let mut iterations = 0;
    let mut best: Option<(ParamSet, f64)> = None;

    let stop = loop {
        if iterations >= config.max_iterations {
            break StopReason::MaxIterations;
        }
        let batch = match tuner.propose() {
            Proposal::Done => break StopReason::Converged,
            Proposal::Batch(b) => b,
        };
        debug_assert!(batch.iter().all(|p| space.validate(p).is_ok()));
        let mut fresh: Vec<ParamSet> = Vec::new();
        for p in &batch {
            if !memo.contains_key(p) && !fresh.contains(p) {
                fresh.push(p.clone());
            }
        }
        let remaining = config.budget - evaluations;
        let truncated = fresh.len() > remaining;
        fresh.truncate(remaining);
        if !fresh.is_empty() {
            let results = objective(&fresh);
            if results.len() != fresh.len() {
                return Err(TuneError::ObjectiveContract {
                    expected: fresh.len(),
                    got: results.len(),
                });
            }
            evaluations += fresh.len();
            for (p, r) in fresh.iter().zip(results) {
                let value = match r {
                    Ok(v) if v.is_finite() => Some(v),
                    Ok(v) => {
                        flags.push(format!("{}: objective returned {v}", space.key(p)));
                        None
                    }
                    Err(e) => {
                        flags.push(format!("{}: {e}", space.key(p)));
                        None
                    }
                };
                memo.insert(p.clone(), value);
            }
        }

        let mut scores = Vec::with_capacity(batch.len());
        let mut seen_now: Vec<&ParamSet> = Vec::new();
        for p in &batch {
            let Some(&value) = memo.get(p) else {
                // budget ran out before this point could be evaluated
                continue;
            };
            let cached = !fresh.contains(p) || seen_now.contains(&p);
            seen_now.push(p);
            let score = value.map_or(f64::NEG_INFINITY, |v| sign * v);
            scores.push(score);
            if let Some(v) = value {
                if best.as_ref().is_none_or(|(_, b)| sign * v > sign * b) {
                    best = Some((p.clone(), v));
                }
            }
            trace.push(TraceRow {
                iteration: iterations,
                params: p.clone(),
                key: space.key(p),
                value,
                cached,
                best: best.as_ref().map(|(_, b)| *b),
            });
        }
        iterations += 1;
        if truncated {
            break StopReason::Budget;
        }
        tuner.update(&scores);
        if let (Some(t), Some((_, b))) = (config.threshold, &best) {
            if sign * b >= sign * t {
                break StopReason::Threshold;
            }
        }
    };
    flags.extend(tuner.flags());
    let grid_size = space.grid_size_f64();
    Ok(TuneResult {
        variant: config.variant,
        direction: config.direction,
        best_key: best.as_ref().map(|(p, _)| space.key(p)),
        best_value: best.as_ref().map(|(_, v)| *v),
        best: best.map(|(p, _)| p),
        evaluations,
        iterations,
        stop,
        grid_size,
        fraction_visited_percent: 100.0 * evaluations as f64 / grid_size,
        flags,
        trace,
    })
}

/// [`tune`] with a point-wise objective.
pub fn tune_fn<F>(
    space: &ParameterSpace,
    config: &TuneConfig,
    mut objective: F,
) -> Result<TuneResult, TuneError>
where
    F: FnMut(&ParamSet) -> Result<f64, String>,
{
    tune(space, config, |batch| {
        batch.iter().map(&mut objective).collect()
    })
}

/// Unit-space coordinates of an on-grid point.
pub(crate) fn to_unit(space: &ParameterSpace, p: &ParamSet) -> Vec<f64> {
    scale_to_unit(space, p).expect("tuner points are on the grid")
}

/// `from + alpha * (to - from)` in unit space, snapped and clamped to the grid.
pub(crate) fn along(space: &ParameterSpace, from: &[f64], to: &[f64], alpha: f64) -> ParamSet {
    let u: Vec<f64> = from
        .iter()
        .zip(to)
        .map(|(f, t)| f + alpha * (t - f))
        .collect();
    unit_to_paramset(space, &u)
}

/// `center` plus `count - 1` distinct neighbours, offset by `step` (unit
/// space) along one axis at a time: +step on every axis first, then -step,
/// then multiples. Offsets that snap back onto the centre move by one level.
pub(crate) fn initial_simplex(
    space: &ParameterSpace,
    center: &ParamSet,
    count: usize,
    step: f64,
) -> Vec<ParamSet> {
    let mut out = vec![center.clone()];
    let k = space.k();
    let limit = space.grid_size_f64().min(count as f64) as usize;
    let mut attempt = 0usize;
    while out.len() < limit && attempt < 64 * (k + 1) * count {
        let axis = attempt % k;
        let round = attempt / k;
        let sign = if round.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mult = (round / 2 + 1) as f64;
        attempt += 1;
        let a = &space.axes()[axis];
        let c = center.levels()[axis];
        let mut level = a.nearest_level(a.unit(c) + sign * mult * step);
        if level == c {
            level = if sign > 0.0 {
                (c + 1).min(a.level_count() - 1)
            } else {
                c.saturating_sub(1)
            };
        }
        let mut p = center.clone();
        p.levels_mut()[axis] = level;
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Grid points one level away from `p` along a single axis.
pub(crate) fn axis_neighbors(space: &ParameterSpace, p: &ParamSet) -> Vec<ParamSet> {
    let mut out = Vec::new();
    for (i, a) in space.axes().iter().enumerate() {
        let l = p.levels()[i];
        if l + 1 < a.level_count() {
            let mut q = p.clone();
            q.levels_mut()[i] = l + 1;
            out.push(q);
        }
        if l > 0 {
            let mut q = p.clone();
            q.levels_mut()[i] = l - 1;
            out.push(q);
        }
    }
    out
}

#[cfg(test)]
mod tests;
