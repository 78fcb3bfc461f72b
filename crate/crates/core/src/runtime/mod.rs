//! Manager/worker execution of compact graphs over a storage hierarchy.
//!
//! The manager owns scheduling and storage and advances a virtual clock:
//! stage compute time comes from a per-stage cost model and data movement
//! from per-level latencies, so hit rates translate into deterministic
//! simulated time. Stage bodies run concurrently on worker threads; the
//! manager processes completions strictly in virtual-time order, which makes
//! reports independent of thread timing.

mod sched;
mod storage;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};
use std::io::{self, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CompactGraph, StageCall, StageExecutor, VertexId};

pub use sched::{Scheduler, SchedulerKind};
pub use storage::{
    Device, LevelConfig, LevelStats, Placement, Policy, RegionId, Retrieval, RetrievalCase,
    Storage, StorageConfig, StorageError, StorageEvent, Visibility,
};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("invalid runtime config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

fn default_workers() -> usize {
    1
}

fn default_stage_cost() -> u64 {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RuntimeConfig {
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub scheduler: SchedulerKind,
    #[serde(default)]
    pub storage: StorageConfig,
    /// Simulated compute time of a stage instance.
    #[serde(default = "default_stage_cost")]
    pub stage_cost_ns: u64,
    /// Per-stage overrides, keyed by stage name or stage kind.
    #[serde(default)]
    pub stage_costs: BTreeMap<String, u64>,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            workers: default_workers(),
            scheduler: SchedulerKind::default(),
            storage: StorageConfig::default(),
            stage_cost_ns: default_stage_cost(),
            stage_costs: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageFailure {
    pub vertex: VertexId,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelReport {
    pub level: usize,
    pub device: Device,
    pub visibility: Visibility,
    pub policy: Policy,
    pub capacity_bytes: u64,
    #[serde(flatten)]
    pub stats: LevelStats,
    pub hit_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RetrievalCounts {
    pub local: u64,
    pub global: u64,
    pub remote: u64,
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time_ns: u64,
    pub worker: Option<usize>,
    pub kind: &'static str,
    pub region: Option<usize>,
    pub level: Option<usize>,
    /// Owner of a local level; `None` for global levels.
    pub owner: Option<usize>,
    pub case: Option<u8>,
    pub occupied: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExecutionReport {
    pub scheduler: SchedulerKind,
    pub workers: usize,
    pub stage_vertices: usize,
    pub executed: usize,
    pub cancelled: usize,
    pub failures: Vec<StageFailure>,
    pub executions_per_worker: Vec<usize>,
    pub levels: Vec<LevelReport>,
    pub retrievals: RetrievalCounts,
    pub virtual_time_ns: u64,
    pub wall_time_ms: f64,
    #[serde(skip)]
    pub events: Vec<Event>,
    /// Outputs of vertices without dependents.
    #[serde(skip)]
    pub outputs: BTreeMap<VertexId, Vec<u8>>,
    /// Vertices in the order they were started.
    #[serde(skip)]
    pub start_order: Vec<VertexId>,
    /// Worker that ran each started vertex.
    #[serde(skip)]
    pub ran_on: BTreeMap<VertexId, usize>,
}

impl ExecutionReport {
    /// Output of `stage` for parameter set `set`, if that vertex is a sink.
    pub fn output_for(&self, graph: &CompactGraph, set: usize, stage: usize) -> Option<&[u8]> {
        graph
            .vertex_for(set, stage)
            .and_then(|v| self.outputs.get(&v))
            .map(Vec::as_slice)
    }

    pub fn level0_hit_rate(&self) -> f64 {
        self.levels[0].hit_rate.unwrap_or(0.0)
    }

    pub fn write_events_csv(&self, mut out: impl Write) -> io::Result<()> {
        fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        writeln!(out, "time_ns,worker,event,region,level,scope,case,occupied")?;
        for e in &self.events {
            let scope = match (e.level, e.owner) {
                (None, _) => String::new(),
                (Some(_), Some(w)) => format!("w{w}"),
                (Some(_), None) => "global".into(),
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                e.time_ns,
                opt(e.worker),
                e.kind,
                opt(e.region.map(|r| format!("r{r}"))),
                opt(e.level),
                scope,
                opt(e.case),
                opt(e.occupied)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Ev {
    Idle(usize),
    Finished(usize, VertexId),
    Stored(usize, VertexId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Waiting,
    Running,
    Done,
    Failed,
    Cancelled,
}

struct Job {
    vertex: VertexId,
    inputs: Vec<Arc<Vec<u8>>>,
}

type JobResult = (VertexId, Result<Vec<u8>, String>);

struct Manager<'g> {
    graph: &'g CompactGraph,
    config: &'g RuntimeConfig,
    storage: Storage,
    sched: Scheduler,
    status: Vec<Status>,
    unresolved: Vec<usize>,
    heap: BinaryHeap<Reverse<(u64, u64, Ev)>>,
    seq: u64,
    idle: VecDeque<usize>,
    results: HashMap<VertexId, Result<Vec<u8>, String>>,
    jobs: Vec<mpsc::Sender<Job>>,
    done_rx: mpsc::Receiver<JobResult>,
    report: ExecutionReport,
}

impl Manager<'_> {
    fn push(&mut self, time: u64, ev: Ev) {
        self.seq += 1;
        self.heap.push(Reverse((time, self.seq, ev)));
    }

    fn log(
        &mut self,
        time_ns: u64,
        worker: Option<usize>,
        kind: &'static str,
        region: Option<usize>,
    ) {
        self.report.events.push(Event {
            time_ns,
            worker,
            kind,
            region,
            level: None,
            owner: None,
            case: None,
            occupied: None,
        });
    }

    fn flush_storage_events(&mut self, time_ns: u64, worker: usize) {
        for e in self.storage.drain_events() {
            self.report.events.push(Event {
                time_ns,
                worker: Some(worker),
                kind: e.kind,
                region: Some(e.region.0),
                level: Some(e.level),
                owner: e.owner,
                case: e.case,
                occupied: Some(e.occupied),
            });
        }
    }

    fn stage_cost(&self, v: VertexId) -> u64 {
        let stage =
            &self.graph.workflow().stages()[self.graph.vertex(v).stage.expect("stage vertex")];
        self.config
            .stage_costs
            .get(&stage.name)
            .or_else(|| self.config.stage_costs.get(stage.kind()))
            .copied()
            .unwrap_or(self.config.stage_cost_ns)
    }

    fn try_assign(&mut self, w: usize, t: u64) -> Result<bool, RuntimeError> {
        let Some(v) = self.sched.next(w) else {
            return Ok(false);
        };
        let mut fetch = 0.0;
        let mut inputs = Vec::new();
        for u in self.graph.inputs(v) {
            let r = self.storage.get(RegionId(u), w)?;
            fetch += r.cost_ns;
            match r.case {
                RetrievalCase::Local => self.report.retrievals.local += 1,
                RetrievalCase::Global => self.report.retrievals.global += 1,
                RetrievalCase::Remote => self.report.retrievals.remote += 1,
            }
            self.storage.consumed(RegionId(u));
            inputs.push(r.payload);
        }
        self.flush_storage_events(t, w);
        self.log(t, Some(w), "start", Some(v));
        self.status[v] = Status::Running;
        self.report.start_order.push(v);
        self.report.ran_on.insert(v, w);
        self.jobs[w]
            .send(Job { vertex: v, inputs })
            .expect("worker threads outlive the manager loop");
        let finish = t + fetch.ceil() as u64 + self.stage_cost(v);
        self.push(finish, Ev::Finished(w, v));
        Ok(true)
    }

    fn wait_for(&mut self, v: VertexId) -> Result<Vec<u8>, String> {
        loop {
            if let Some(r) = self.results.remove(&v) {
                return r;
            }
            let (u, r) = self
                .done_rx
                .recv()
                .expect("worker threads outlive the manager loop");
            self.results.insert(u, r);
        }
    }

    fn cancel_descendants(&mut self, v: VertexId, t: u64) {
        let mut stack: Vec<VertexId> = self.graph.vertex(v).children.clone();
        while let Some(c) = stack.pop() {
            if self.status[c] != Status::Waiting {
                continue;
            }
            self.status[c] = Status::Cancelled;
            self.report.cancelled += 1;
            self.sched.cancel(c);
            self.log(t, None, "cancel", Some(c));
            // finished inputs lose a reader
            for &p in &self.graph.vertex(c).parents {
                if self.status[p] == Status::Done {
                    self.storage.consumed(RegionId(p));
                }
            }
            stack.extend(self.graph.vertex(c).children.iter().copied());
        }
    }

    fn on_finished(&mut self, w: usize, v: VertexId, t: u64) -> Result<(), RuntimeError> {
        match self.wait_for(v) {
            Ok(bytes) => {
                self.report.executed += 1;
                self.report.executions_per_worker[w] += 1;
                self.log(t, Some(w), "finish", Some(v));
                let readers = self
                    .graph
                    .vertex(v)
                    .children
                    .iter()
                    .filter(|&&c| self.status[c] == Status::Waiting)
                    .count();
                let mut cost = 0.0;
                if self.graph.vertex(v).children.is_empty() {
                    self.report.outputs.insert(v, bytes);
                } else if readers > 0 {
                    self.storage.set_consumers(RegionId(v), readers);
                    cost = self.storage.put(RegionId(v), Arc::new(bytes), w)?.cost_ns;
                    self.flush_storage_events(t, w);
                }
                self.push(t + cost.ceil() as u64, Ev::Stored(w, v));
            }
            Err(message) => {
                let stage = self.graph.workflow().stages()
                    [self.graph.vertex(v).stage.expect("stage vertex")]
                .name
                .clone();
                log::warn!("stage `{stage}` (vertex {v}) failed: {message}");
                self.status[v] = Status::Failed;
                self.report.failures.push(StageFailure {
                    vertex: v,
                    stage,
                    message,
                });
                self.log(t, Some(w), "fail", Some(v));
                self.cancel_descendants(v, t);
                self.push(t, Ev::Idle(w));
            }
        }
        Ok(())
    }

    fn on_stored(&mut self, w: usize, v: VertexId, t: u64) -> Result<(), RuntimeError> {
        self.status[v] = Status::Done;
        let children = self.graph.vertex(v).children.clone();
        for c in children {
            if self.status[c] != Status::Waiting {
                continue;
            }
            self.unresolved[c] -= 1;
            if self.unresolved[c] == 0 {
                self.sched.mark_ready(c);
            }
            if self.sched.kind() == SchedulerKind::Dlas {
                let reuse = self
                    .graph
                    .inputs(c)
                    .iter()
                    .map(|&u| self.storage.local_bytes(RegionId(u), w))
                    .sum();
                self.sched.prefer(w, c, reuse);
            }
        }
        if !self.try_assign(w, t)? {
            self.idle.push_back(w);
        }
        self.wake_idle(t)
    }

    fn wake_idle(&mut self, t: u64) -> Result<(), RuntimeError> {
        let mut still_idle = VecDeque::new();
        while let Some(w) = self.idle.pop_front() {
            if self.sched.ready_len() == 0 || !self.try_assign(w, t)? {
                still_idle.push_back(w);
            }
        }
        self.idle = still_idle;
        Ok(())
    }

    fn run(&mut self) -> Result<(), RuntimeError> {
        for v in self.graph.topo_order() {
            if self.unresolved[v] == 0 {
                self.sched.mark_ready(v);
            }
        }
        for w in 0..self.config.workers {
            self.push(0, Ev::Idle(w));
        }
        let mut now = 0;
        while let Some(Reverse((t, _, ev))) = self.heap.pop() {
            now = t;
            match ev {
                Ev::Idle(w) => {
                    if !self.try_assign(w, t)? {
                        self.idle.push_back(w);
                    }
                }
                Ev::Finished(w, v) => self.on_finished(w, v, t)?,
                Ev::Stored(w, v) => self.on_stored(w, v, t)?,
            }
        }
        self.report.virtual_time_ns = now;
        debug_assert!(self
            .status
            .iter()
            .skip(1)
            .all(|s| matches!(s, Status::Done | Status::Failed | Status::Cancelled)));
        Ok(())
    }
}

/// Executes every vertex of `graph` once on `config.workers` workers.
pub fn run(
    graph: &CompactGraph,
    executor: &dyn StageExecutor,
    config: &RuntimeConfig,
) -> Result<ExecutionReport, RuntimeError> {
    if config.workers == 0 {
        return Err(RuntimeError::InvalidConfig(
            "at least one worker is required".into(),
        ));
    }
    let started = Instant::now();
    let storage = Storage::new(&config.storage, config.workers)?;
    let n = graph.vertices().len();
    let unresolved: Vec<usize> = graph
        .vertices()
        .iter()
        .map(|v| {
            v.parents
                .iter()
                .filter(|&&p| p != CompactGraph::ROOT)
                .count()
        })
        .collect();

    let mut report = std::thread::scope(|scope| -> Result<ExecutionReport, RuntimeError> {
        let (done_tx, done_rx) = mpsc::channel::<JobResult>();
        let mut jobs = Vec::with_capacity(config.workers);
        for _ in 0..config.workers {
            let (tx, rx) = mpsc::channel::<Job>();
            jobs.push(tx);
            let done_tx = done_tx.clone();
            scope.spawn(move || {
                for job in rx {
                    let stage = &graph.workflow().stages()
                        [graph.vertex(job.vertex).stage.expect("stage vertex")];
                    let params = graph.params(job.vertex);
                    let inputs: Vec<&[u8]> = job.inputs.iter().map(|b| b.as_slice()).collect();
                    let call = StageCall {
                        stage,
                        params: &params,
                        inputs: &inputs,
                    };
                    let out = catch_unwind(AssertUnwindSafe(|| executor.execute(&call)))
                        .unwrap_or_else(|_| Err("stage panicked".to_string()));
                    if done_tx.send((job.vertex, out)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(done_tx);
        let mut manager = Manager {
            graph,
            config,
            storage,
            sched: Scheduler::new(config.scheduler, config.workers),
            status: vec![Status::Waiting; n],
            unresolved,
            heap: BinaryHeap::new(),
            seq: 0,
            idle: VecDeque::new(),
            results: HashMap::new(),
            jobs,
            done_rx,
            report: ExecutionReport {
                scheduler: config.scheduler,
                workers: config.workers,
                stage_vertices: graph.stage_vertex_count(),
                executed: 0,
                cancelled: 0,
                failures: Vec::new(),
                executions_per_worker: vec![0; config.workers],
                levels: Vec::new(),
                retrievals: RetrievalCounts::default(),
                virtual_time_ns: 0,
                wall_time_ms: 0.0,
                events: Vec::new(),
                outputs: BTreeMap::new(),
                start_order: Vec::new(),
                ran_on: BTreeMap::new(),
            },
        };
        manager.status[CompactGraph::ROOT] = Status::Done;
        let outcome = manager.run();
        // closing the job channels lets the workers exit
        manager.jobs.clear();
        outcome?;
        manager.report.levels = config
            .storage
            .levels
            .iter()
            .zip(manager.storage.stats())
            .enumerate()
            .map(|(i, (l, s))| LevelReport {
                level: i,
                device: l.device,
                visibility: l.visibility,
                policy: l.policy,
                capacity_bytes: l.capacity,
                stats: s.clone(),
                hit_rate: (s.hits + s.misses > 0)
                    .then(|| s.hits as f64 / (s.hits + s.misses) as f64),
            })
            .collect();
        Ok(manager.report)
    })?;
    report.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}
