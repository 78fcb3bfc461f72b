//! Reference execution of compact graphs and the replay-equivalence check.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use super::{
    build_compact, build_replica, CompactGraph, GraphError, StageCall, StageExecutor, VertexId,
    Workflow,
};
use crate::space::ParamSet;

/// Outputs of a single-threaded, topological run.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialRun {
    /// Indexed by vertex id; `None` for the root.
    pub outputs: Vec<Option<Vec<u8>>>,
    pub executions: usize,
}

impl SequentialRun {
    /// Output of `stage` for parameter set `set`.
    pub fn output_for(&self, graph: &CompactGraph, set: usize, stage: usize) -> Option<&[u8]> {
        graph
            .vertex_for(set, stage)
            .and_then(|v| self.outputs[v].as_deref())
    }
}

fn digest(inputs: &[&[u8]]) -> u64 {
    let mut h = DefaultHasher::new();
    inputs.hash(&mut h);
    h.finish()
}

/// Runs every vertex once in topological order. Output bytes observed for a
/// `(vertex key, input digest)` are recorded in `seen`; a pure stage that
/// produces different bytes for the same record is a purity violation.
fn run_checked(
    graph: &CompactGraph,
    executor: &dyn StageExecutor,
    seen: &mut HashMap<(String, u64), Vec<u8>>,
    key_of: impl Fn(VertexId) -> String,
) -> Result<SequentialRun, GraphError> {
    let mut outputs: Vec<Option<Vec<u8>>> = vec![None; graph.vertices().len()];
    let mut executions = 0;
    for v in graph.topo_order() {
        let stage = &graph.workflow().stages()[graph.vertex(v).stage.expect("stage vertex")];
        let ins = graph.inputs(v);
        let inputs: Vec<&[u8]> = ins
            .iter()
            .map(|&p| outputs[p].as_deref().expect("inputs run first"))
            .collect();
        let params = graph.params(v);
        let out = executor
            .execute(&StageCall {
                stage,
                params: &params,
                inputs: &inputs,
            })
            .map_err(|message| GraphError::StageFailed {
                stage: stage.name.clone(),
                message,
            })?;
        executions += 1;
        let record = (key_of(v), digest(&inputs));
        match seen.get(&record) {
            Some(prev) if stage.pure && *prev != out => {
                return Err(GraphError::PurityViolation {
                    stage: stage.name.clone(),
                });
            }
            Some(_) => {}
            None => {
                seen.insert(record, out.clone());
            }
        }
        outputs[v] = Some(out);
    }
    Ok(SequentialRun {
        outputs,
        executions,
    })
}

pub fn execute_sequential(
    graph: &CompactGraph,
    executor: &dyn StageExecutor,
) -> Result<SequentialRun, GraphError> {
    let mut seen = HashMap::new();
    run_checked(graph, executor, &mut seen, |v| graph.vertex(v).key.clone())
}

/// Executes the workflow for every set under both the replica and the
/// compact scheme and reports whether each sink output of the compact run is
/// bit-identical to the replica run for the same set.
pub fn replay_equivalence(
    workflow: &Workflow,
    sets: &[ParamSet],
    executor: &dyn StageExecutor,
) -> Result<bool, GraphError> {
    let replica = build_replica(workflow, sets)?;
    let compact = build_compact(workflow, sets)?;
    // Records are keyed by stage signature without the replica's set prefix,
    // so repeated calls with identical inputs across runs are compared.
    let strip = |key: &str| {
        key.split_once(' ')
            .map_or(key, |(_, rest)| rest)
            .to_string()
    };
    let mut seen = HashMap::new();
    let rep = run_checked(&replica, executor, &mut seen, |v| {
        strip(&replica.vertex(v).key)
    })?;
    let com = run_checked(&compact, executor, &mut seen, |v| {
        compact.vertex(v).key.clone()
    })?;
    for set in 0..sets.len() {
        for sink in workflow.sinks() {
            if rep.output_for(&replica, set, sink) != com.output_for(&compact, set, sink) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
