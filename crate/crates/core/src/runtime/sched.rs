//! Ready-instance selection: FCFS and data-locality-aware (DLAS) policies.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::graph::VertexId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    #[default]
    Fcfs,
    Dlas,
}

impl std::str::FromStr for SchedulerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fcfs" => Ok(Self::Fcfs),
            "dlas" => Ok(Self::Dlas),
            other => Err(format!(
                "unknown scheduler `{other}` (expected fcfs or dlas)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Preferred {
    reuse: u64,
    seq: u64,
    vertex: VertexId,
}

/// Ready and preferred queues owned by the manager.
#[derive(Debug)]
pub struct Scheduler {
    kind: SchedulerKind,
    /// Ready instances by the order in which they became ready.
    ready: BTreeMap<u64, VertexId>,
    ready_seq: HashMap<VertexId, u64>,
    /// Per-worker preferred queues, sorted by reuse descending then age.
    preferred: Vec<Vec<Preferred>>,
    queued_on: HashMap<VertexId, usize>,
    seq: u64,
}

impl Scheduler {
    pub fn new(kind: SchedulerKind, workers: usize) -> Self {
        Self {
            kind,
            ready: BTreeMap::new(),
            ready_seq: HashMap::new(),
            preferred: vec![Vec::new(); workers],
            queued_on: HashMap::new(),
            seq: 0,
        }
    }

    pub fn kind(&self) -> SchedulerKind {
        self.kind
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    pub fn mark_ready(&mut self, vertex: VertexId) {
        let seq = self.next_seq();
        self.ready.insert(seq, vertex);
        self.ready_seq.insert(vertex, seq);
    }

    pub fn is_ready(&self, vertex: VertexId) -> bool {
        self.ready_seq.contains_key(&vertex)
    }

    pub fn ready_len(&self) -> usize {
        self.ready.len()
    }

    /// Queues `vertex` on `worker`'s preferred queue, moving it there if it
    /// was preferred by another worker. No-op under FCFS.
    pub fn prefer(&mut self, worker: usize, vertex: VertexId, reuse: u64) {
        if self.kind != SchedulerKind::Dlas {
            return;
        }
        self.unqueue(vertex);
        let entry = Preferred {
            reuse,
            seq: self.next_seq(),
            vertex,
        };
        let q = &mut self.preferred[worker];
        let at = q.partition_point(|e| {
            (e.reuse, std::cmp::Reverse(e.seq)) > (reuse, std::cmp::Reverse(entry.seq))
        });
        q.insert(at, entry);
        self.queued_on.insert(vertex, worker);
    }

    fn unqueue(&mut self, vertex: VertexId) {
        if let Some(w) = self.queued_on.remove(&vertex) {
            self.preferred[w].retain(|e| e.vertex != vertex);
        }
    }

    /// Preferred queue of `worker`, best first: `(vertex, reuse)`.
    pub fn preferred(&self, worker: usize) -> Vec<(VertexId, u64)> {
        self.preferred[worker]
            .iter()
            .map(|e| (e.vertex, e.reuse))
            .collect()
    }

    /// Next instance for an idle `worker`, or `None` if nothing is ready.
    pub fn next(&mut self, worker: usize) -> Option<VertexId> {
        let choice = match self.kind {
            SchedulerKind::Dlas => self.preferred[worker]
                .iter()
                .find(|e| self.ready_seq.contains_key(&e.vertex))
                .map(|e| e.vertex),
            SchedulerKind::Fcfs => None,
        }
        .or_else(|| self.ready.values().next().copied())?;
        let seq = self
            .ready_seq
            .remove(&choice)
            .expect("chosen instance is ready");
        self.ready.remove(&seq);
        self.unqueue(choice);
        Some(choice)
    }

    /// Forgets an instance that will never run.
    pub fn cancel(&mut self, vertex: VertexId) {
        if let Some(seq) = self.ready_seq.remove(&vertex) {
            self.ready.remove(&seq);
        }
        self.unqueue(vertex);
    }
}
