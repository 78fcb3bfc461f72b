//! Workflows as DAGs of parameterized stages, and their compact composition.
//!
//! A [`Workflow`] declares stages, the axes each stage consumes and its
//! upstream stages. Instantiating it for a [`ParamSet`] binds every stage to
//! concrete values. [`build_compact`] folds many instantiations into a single
//! [`CompactGraph`] in which stage instances with identical parameters and
//! identical upstream parameters are shared.

mod compact;
mod replay;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{AxisValue, ParameterSpace};

pub use compact::{
    build_compact, build_replica, instantiate, merge_graph, CompactGraph, InstanceGraph, VertexId,
};
pub use replay::{execute_sequential, replay_equivalence, SequentialRun};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("malformed workflow: {0}")]
    Malformed(String),
    #[error("stage `{stage}` consumes unknown axis `{axis}`")]
    UnknownAxis { stage: String, axis: String },
    #[error("at least one parameter set is required")]
    NoParamSets,
    #[error("invalid parameter set: {0}")]
    InvalidParamSet(String),
    #[error("stage `{stage}` is impure: identical inputs produced different outputs")]
    PurityViolation { stage: String },
    #[error("stage `{stage}` failed: {message}")]
    StageFailed { stage: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageDecl {
    pub name: String,
    /// Executor-specific operation; defaults to the stage name.
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub axes: Vec<String>,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default = "default_pure")]
    pub pure: bool,
}

fn default_pure() -> bool {
    true
}

impl StageDecl {
    pub fn new(name: &str, axes: &[&str], inputs: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: None,
            axes: axes.iter().map(|s| s.to_string()).collect(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            pure: true,
        }
    }

    pub fn with_kind(mut self, kind: &str) -> Self {
        self.kind = Some(kind.to_string());
        self
    }

    pub fn kind(&self) -> &str {
        self.kind.as_deref().unwrap_or(&self.name)
    }
}

/// Validated stage DAG bound to a parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct Workflow {
    space: ParameterSpace,
    stages: Vec<StageDecl>,
    /// Axis indices consumed by each stage.
    axis_index: Vec<Vec<usize>>,
    /// Upstream stage indices of each stage.
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    /// Stages in a topological order.
    topo: Vec<usize>,
}

impl Workflow {
    pub fn new(space: ParameterSpace, stages: Vec<StageDecl>) -> Result<Self, GraphError> {
        if stages.is_empty() {
            return Err(GraphError::Malformed("workflow has no stages".into()));
        }
        let mut by_name = HashMap::new();
        for (i, s) in stages.iter().enumerate() {
            if by_name.insert(s.name.as_str(), i).is_some() {
                return Err(GraphError::Malformed(format!(
                    "stage name `{}` is repeated; rename repeated stages",
                    s.name
                )));
            }
        }
        let mut parents = vec![Vec::new(); stages.len()];
        let mut children = vec![Vec::new(); stages.len()];
        let mut axis_index = Vec::with_capacity(stages.len());
        for (i, s) in stages.iter().enumerate() {
            let mut seen = HashSet::new();
            for input in &s.inputs {
                let &p = by_name.get(input.as_str()).ok_or_else(|| {
                    GraphError::Malformed(format!(
                        "stage `{}` reads unknown stage `{input}`",
                        s.name
                    ))
                })?;
                if !seen.insert(p) {
                    return Err(GraphError::Malformed(format!(
                        "stage `{}` lists input `{input}` twice",
                        s.name
                    )));
                }
                parents[i].push(p);
                children[p].push(i);
            }
            let mut idx = Vec::with_capacity(s.axes.len());
            for axis in &s.axes {
                let a = space
                    .axis_index(axis)
                    .map_err(|_| GraphError::UnknownAxis {
                        stage: s.name.clone(),
                        axis: axis.clone(),
                    })?;
                idx.push(a);
            }
            axis_index.push(idx);
        }

        // Kahn's algorithm; leftovers mean a cycle
        let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut ready: Vec<usize> = (0..stages.len())
            .filter(|&i| indegree[i] == 0)
            .rev()
            .collect();
        let mut topo = Vec::with_capacity(stages.len());
        while let Some(i) = ready.pop() {
            topo.push(i);
            for &c in children[i].iter().rev() {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(c);
                }
            }
        }
        if topo.len() != stages.len() {
            return Err(GraphError::Malformed("workflow contains a cycle".into()));
        }
        Ok(Self {
            space,
            stages,
            axis_index,
            parents,
            children,
            topo,
        })
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn stages(&self) -> &[StageDecl] {
        &self.stages
    }

    pub fn stage_index(&self, name: &str) -> Option<usize> {
        self.stages.iter().position(|s| s.name == name)
    }

    pub fn parents(&self, stage: usize) -> &[usize] {
        &self.parents[stage]
    }

    pub fn children(&self, stage: usize) -> &[usize] {
        &self.children[stage]
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn sources(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.stages.len()).filter(|&i| self.parents[i].is_empty())
    }

    pub fn sinks(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.stages.len()).filter(|&i| self.children[i].is_empty())
    }

    pub(crate) fn stage_axes(&self, stage: usize) -> &[usize] {
        &self.axis_index[stage]
    }

    /// Every stage that `stage` transitively reads from.
    pub fn ancestors(&self, stage: usize) -> Vec<usize> {
        let mut seen = vec![false; self.stages.len()];
        let mut stack = self.parents[stage].clone();
        while let Some(s) = stack.pop() {
            if !seen[s] {
                seen[s] = true;
                stack.extend(&self.parents[s]);
            }
        }
        (0..self.stages.len()).filter(|&s| seen[s]).collect()
    }
}

/// One stage execution request.
pub struct StageCall<'a> {
    pub stage: &'a StageDecl,
    /// Values of the stage's consumed axes, by axis name.
    pub params: &'a [(String, AxisValue)],
    /// Outputs of the upstream stages, in `stage.inputs` order.
    pub inputs: &'a [&'a [u8]],
}

impl StageCall<'_> {
    pub fn param(&self, axis: &str) -> Option<&AxisValue> {
        self.params.iter().find(|(n, _)| n == axis).map(|(_, v)| v)
    }
}

/// Runs stage bodies. Implementations must be pure for stages declared pure.
pub trait StageExecutor: Sync {
    fn execute(&self, call: &StageCall<'_>) -> Result<Vec<u8>, String>;
}

impl<F> StageExecutor for F
where
    F: Fn(&StageCall<'_>) -> Result<Vec<u8>, String> + Sync,
{
    fn execute(&self, call: &StageCall<'_>) -> Result<Vec<u8>, String> {
        self(call)
    }
}
