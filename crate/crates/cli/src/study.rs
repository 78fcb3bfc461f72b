//! Runs batches of parameter sets through the workflow: each batch becomes
//! one compact graph executed on the runtime.

use std::io::Write;

use log::{debug, info};
use paramstudy_core::bench::decode_metric;
use paramstudy_core::graph::{build_compact, CompactGraph, Workflow};
use paramstudy_core::runtime::{run, ExecutionReport, RetrievalCounts};
use paramstudy_core::ParamSet;
use serde::Serialize;

use crate::config::Study;
use crate::CliError;

pub struct Evaluator<'a> {
    study: &'a Study,
    workflow: Workflow,
    compare_stage: usize,
    reports: Vec<ExecutionReport>,
    evaluations: usize,
}

/// Totals over all runtime executions of a study.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ExecutionSummary {
    pub batches: usize,
    pub evaluations: usize,
    /// Stage instances had every set run as its own replica graph.
    pub replica_stage_vertices: usize,
    /// Stage instances after merging into compact graphs.
    pub compact_stage_vertices: usize,
    pub executed: usize,
    pub cancelled: usize,
    pub failures: usize,
    pub level_hits: Vec<u64>,
    pub level_misses: Vec<u64>,
    pub retrievals: RetrievalCounts,
    pub virtual_time_ns: u64,
    pub wall_time_ms: f64,
    /// Per-batch runtime reports.
    pub reports: Vec<ExecutionReport>,
}

impl<'a> Evaluator<'a> {
    pub fn new(study: &'a Study) -> Result<Self, CliError> {
        let stages = study.workflow.stages(&study.space);
        let workflow = Workflow::new(study.space.clone(), stages)
            .map_err(|e| CliError::Config(format!("workflow: {e}")))?;
        let compare_stage = workflow
            .stage_index("compare")
            .expect("synthetic workflow has a compare stage");
        Ok(Self {
            study,
            workflow,
            compare_stage,
            reports: Vec::new(),
            evaluations: 0,
        })
    }

    /// Metric value per point, in order. Stage failures are per-point
    /// errors; graph or runtime errors abort the study.
    pub fn evaluate(&mut self, points: &[ParamSet]) -> Result<Vec<Result<f64, String>>, CliError> {
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(self.study.config.batch) {
            let graph = build_compact(&self.workflow, chunk)
                .map_err(|e| CliError::Execution(e.to_string()))?;
            let report = run(&graph, &self.study.workflow, &self.study.runtime)
                .map_err(|e| CliError::Execution(e.to_string()))?;
            debug!(
                "batch {}: {} sets, {} stage instances, {} failures",
                self.reports.len(),
                chunk.len(),
                graph.stage_vertex_count(),
                report.failures.len()
            );
            for set in 0..chunk.len() {
                out.push(self.metric_for(&graph, &report, set));
            }
            self.evaluations += chunk.len();
            self.reports.push(report);
        }
        Ok(out)
    }

    fn metric_for(
        &self,
        graph: &CompactGraph,
        report: &ExecutionReport,
        set: usize,
    ) -> Result<f64, String> {
        if let Some(v) = report
            .output_for(graph, set, self.compare_stage)
            .and_then(decode_metric)
        {
            return Ok(v);
        }
        let stages = self.workflow.stages().len();
        let failure = (0..stages)
            .filter_map(|s| graph.vertex_for(set, s))
            .find_map(|v| report.failures.iter().find(|f| f.vertex == v));
        Err(match failure {
            Some(f) => format!("stage `{}` failed: {}", f.stage, f.message),
            None => "no metric produced".to_string(),
        })
    }

    pub fn summary(&self) -> ExecutionSummary {
        let levels = self.study.runtime.storage.levels.len();
        let mut s = ExecutionSummary {
            batches: self.reports.len(),
            evaluations: self.evaluations,
            replica_stage_vertices: self.evaluations * self.workflow.stages().len(),
            level_hits: vec![0; levels],
            level_misses: vec![0; levels],
            reports: self.reports.clone(),
            ..ExecutionSummary::default()
        };
        for r in &self.reports {
            s.compact_stage_vertices += r.stage_vertices;
            s.executed += r.executed;
            s.cancelled += r.cancelled;
            s.failures += r.failures.len();
            s.virtual_time_ns += r.virtual_time_ns;
            s.wall_time_ms += r.wall_time_ms;
            s.retrievals.local += r.retrievals.local;
            s.retrievals.global += r.retrievals.global;
            s.retrievals.remote += r.retrievals.remote;
            for l in &r.levels {
                s.level_hits[l.level] += l.stats.hits;
                s.level_misses[l.level] += l.stats.misses;
            }
        }
        info!(
            "{} evaluations in {} batches: {} of {} stage instances after merging",
            s.evaluations, s.batches, s.compact_stage_vertices, s.replica_stage_vertices
        );
        s
    }

    /// The runtime event logs of all batches, with a leading batch column.
    pub fn write_events_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "batch,time_ns,worker,event,region,level,scope,case,occupied"
        )?;
        for (b, r) in self.reports.iter().enumerate() {
            let mut buf = Vec::new();
            r.write_events_csv(&mut buf)?;
            let text = String::from_utf8(buf).expect("event log is ASCII");
            for line in text.lines().skip(1) {
                writeln!(out, "{b},{line}")?;
            }
        }
        Ok(())
    }
}
