//! Instantiation of workflows and their merge into a compact graph.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};

use super::{GraphError, Workflow};
use crate::space::{AxisValue, ParamSet};

pub type VertexId = usize;

/// One stage instance of an instantiated workflow.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceVertex {
    pub stage: usize,
    /// `(axis index, level)` for every axis the stage consumes.
    pub bound: Vec<(usize, usize)>,
    /// Identity used for matching: stage name, own parameters and the
    /// parameters of every upstream stage.
    pub key: String,
    pub deps: usize,
    pub children: Vec<usize>,
}

/// A workflow with every stage bound to one parameter set. Vertex `i`
/// instantiates stage `i`; sources hang below a synthetic root.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceGraph {
    pub root_children: Vec<usize>,
    pub vertices: Vec<InstanceVertex>,
}

fn stage_signature(workflow: &Workflow, stage: usize, set: &ParamSet) -> String {
    let decl = &workflow.stages()[stage];
    let axes = workflow.stage_axes(stage);
    if axes.is_empty() {
        return decl.name.clone();
    }
    let space = workflow.space();
    let params: Vec<String> = axes
        .iter()
        .map(|&a| {
            let axis = &space.axes()[a];
            // validated by the caller
            let value = axis.value(set.levels()[a]).expect("level in range");
            format!("{}={value}", axis.name())
        })
        .collect();
    format!("{}({})", decl.name, params.join(","))
}

pub fn instantiate(workflow: &Workflow, set: &ParamSet) -> Result<InstanceGraph, GraphError> {
    workflow
        .space()
        .validate(set)
        .map_err(|e| GraphError::InvalidParamSet(e.to_string()))?;
    let n = workflow.stages().len();
    let signatures: Vec<String> = (0..n).map(|s| stage_signature(workflow, s, set)).collect();
    let vertices = (0..n)
        .map(|s| {
            let ancestors = workflow.ancestors(s);
            let mut key = signatures[s].clone();
            if !ancestors.is_empty() {
                let up: Vec<&str> = ancestors.iter().map(|&a| signatures[a].as_str()).collect();
                write!(key, " <- [{}]", up.join("; ")).expect("write to string");
            }
            InstanceVertex {
                stage: s,
                bound: workflow
                    .stage_axes(s)
                    .iter()
                    .map(|&a| (a, set.levels()[a]))
                    .collect(),
                key,
                deps: workflow.parents(s).len().max(1),
                children: workflow.children(s).to_vec(),
            }
        })
        .collect();
    Ok(InstanceGraph {
        root_children: workflow.sources().collect(),
        vertices,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompactVertex {
    /// `None` for the synthetic root.
    pub stage: Option<usize>,
    pub bound: Vec<(usize, usize)>,
    pub key: String,
    pub children: Vec<VertexId>,
    pub parents: Vec<VertexId>,
    pub deps: usize,
    pub deps_solved: usize,
}

/// Merged instantiations of one workflow. Vertex 0 is the synthetic root.
#[derive(Debug, Clone)]
pub struct CompactGraph {
    workflow: Workflow,
    vertices: Vec<CompactVertex>,
    /// Parameter-set indices sharing each vertex.
    provenance: Vec<BTreeSet<usize>>,
    pending: HashMap<String, VertexId>,
    sets: usize,
}

impl CompactGraph {
    pub const ROOT: VertexId = 0;

    pub fn new(workflow: Workflow) -> Self {
        Self {
            workflow,
            vertices: vec![CompactVertex {
                stage: None,
                bound: Vec::new(),
                key: "root".into(),
                children: Vec::new(),
                parents: Vec::new(),
                deps: 0,
                deps_solved: 0,
            }],
            provenance: vec![BTreeSet::new()],
            pending: HashMap::new(),
            sets: 0,
        }
    }

    /// Merges one instantiation; it is recorded as the next parameter set.
    pub fn merge(&mut self, inst: &InstanceGraph) {
        let set = self.sets;
        self.sets += 1;
        self.provenance[Self::ROOT].insert(set);
        for &v in &inst.root_children {
            self.merge_child(inst, v, Self::ROOT, set);
        }
    }

    fn merge_child(&mut self, inst: &InstanceGraph, v: usize, com: VertexId, set: usize) {
        let iv = &inst.vertices[v];
        let found = self.vertices[com]
            .children
            .iter()
            .copied()
            .find(|&c| self.vertices[c].key == iv.key);
        let target = match found {
            Some(c) => c,
            None => match self.pending.get(&iv.key).copied() {
                None => {
                    let id = self.vertices.len();
                    self.vertices.push(CompactVertex {
                        stage: Some(iv.stage),
                        bound: iv.bound.clone(),
                        key: iv.key.clone(),
                        children: Vec::new(),
                        parents: vec![com],
                        deps: iv.deps,
                        deps_solved: 1,
                    });
                    self.provenance.push(BTreeSet::new());
                    self.vertices[com].children.push(id);
                    // only vertices still waiting for another parent are pending
                    if iv.deps > 1 {
                        self.pending.insert(iv.key.clone(), id);
                    }
                    id
                }
                Some(id) => {
                    self.vertices[com].children.push(id);
                    self.vertices[id].parents.push(com);
                    let vert = &mut self.vertices[id];
                    vert.deps_solved += 1;
                    if vert.deps_solved == vert.deps {
                        self.pending.remove(&iv.key);
                    }
                    id
                }
            },
        };
        self.provenance[target].insert(set);
        for &c in &inst.vertices[v].children {
            self.merge_child(inst, c, target, set);
        }
    }

    pub fn workflow(&self) -> &Workflow {
        &self.workflow
    }

    pub fn vertices(&self) -> &[CompactVertex] {
        &self.vertices
    }

    pub fn vertex(&self, id: VertexId) -> &CompactVertex {
        &self.vertices[id]
    }

    /// Number of stage vertices, excluding the root.
    pub fn stage_vertex_count(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn set_count(&self) -> usize {
        self.sets
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn provenance(&self, id: VertexId) -> &BTreeSet<usize> {
        &self.provenance[id]
    }

    /// The vertex instantiating `stage` for parameter set `set`.
    pub fn vertex_for(&self, set: usize, stage: usize) -> Option<VertexId> {
        (1..self.vertices.len())
            .find(|&v| self.vertices[v].stage == Some(stage) && self.provenance[v].contains(&set))
    }

    /// Upstream vertices of `id` in the order of the stage's declared inputs.
    pub fn inputs(&self, id: VertexId) -> Vec<VertexId> {
        let Some(stage) = self.vertices[id].stage else {
            return Vec::new();
        };
        self.workflow
            .parents(stage)
            .iter()
            .map(|&p| {
                *self.vertices[id]
                    .parents
                    .iter()
                    .find(|&&q| self.vertices[q].stage == Some(p))
                    .expect("every declared input is linked")
            })
            .collect()
    }

    /// Bound parameter values of a stage vertex, by axis name.
    pub fn params(&self, id: VertexId) -> Vec<(String, AxisValue)> {
        let space = self.workflow.space();
        self.vertices[id]
            .bound
            .iter()
            .map(|&(a, level)| {
                let axis = &space.axes()[a];
                (
                    axis.name().to_string(),
                    axis.value(level).expect("level in range"),
                )
            })
            .collect()
    }

    /// Stage vertices in a topological order (ties by creation order).
    pub fn topo_order(&self) -> Vec<VertexId> {
        let n = self.vertices.len();
        let mut indegree: Vec<usize> = self.vertices.iter().map(|v| v.parents.len()).collect();
        let mut ready = std::collections::BTreeSet::new();
        for &c in &self.vertices[Self::ROOT].children {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
        let mut order = Vec::with_capacity(n - 1);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &self.vertices[v].children {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        order
    }

    /// Sorted `(vertex key, sorted child keys)` pairs; equal for isomorphic graphs.
    pub fn canonical_form(&self) -> Vec<(String, Vec<String>)> {
        let mut form: Vec<(String, Vec<String>)> = self
            .vertices
            .iter()
            .map(|v| {
                let mut children: Vec<String> = v
                    .children
                    .iter()
                    .map(|&c| self.vertices[c].key.clone())
                    .collect();
                children.sort();
                (v.key.clone(), children)
            })
            .collect();
        form.sort();
        form
    }

    pub fn canonical_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.canonical_form().hash(&mut h);
        h.finish()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph compact {\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let sets: Vec<String> = self.provenance[i].iter().map(usize::to_string).collect();
            let label = match v.stage {
                None => "root".to_string(),
                Some(_) => v.key.split(" <- ").next().unwrap_or(&v.key).to_string(),
            };
            writeln!(
                out,
                "  v{i} [label=\"{}\\nsets {{{}}}\"];",
                label.replace('"', "\\\""),
                sets.join(",")
            )
            .expect("write to string");
        }
        for (i, v) in self.vertices.iter().enumerate() {
            for c in &v.children {
                writeln!(out, "  v{i} -> v{c};").expect("write to string");
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Merges `inst` into `com` (one more parameter set).
pub fn merge_graph(inst: &InstanceGraph, com: &mut CompactGraph) {
    com.merge(inst);
}

pub fn build_compact(workflow: &Workflow, sets: &[ParamSet]) -> Result<CompactGraph, GraphError> {
    if sets.is_empty() {
        return Err(GraphError::NoParamSets);
    }
    let mut com = CompactGraph::new(workflow.clone());
    for set in sets {
        com.merge(&instantiate(workflow, set)?);
    }
    Ok(com)
}

/// One private copy of the workflow per parameter set, with no sharing.
pub fn build_replica(workflow: &Workflow, sets: &[ParamSet]) -> Result<CompactGraph, GraphError> {
    if sets.is_empty() {
        return Err(GraphError::NoParamSets);
    }
    let mut com = CompactGraph::new(workflow.clone());
    for (i, set) in sets.iter().enumerate() {
        let mut inst = instantiate(workflow, set)?;
        for v in &mut inst.vertices {
            v.key = format!("#{i} {}", v.key);
        }
        com.merge(&inst);
    }
    Ok(com)
}
