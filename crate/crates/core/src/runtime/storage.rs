//! Multi-level storage hierarchy for data regions.
//!
//! Each worker sees its private local levels first and the shared global
//! levels after them. Insertion targets the fastest level large enough for
//! the region; when it overflows, the level's replacement policy picks
//! victims that are demoted one level down, cascading as needed.

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("invalid storage config: {0}")]
    InvalidConfig(String),
    #[error("region {0} ({1} bytes) is larger than every storage level")]
    Unstorable(RegionId, u64),
    #[error("storage full: no evictable region at the lowest level for region {0}")]
    Full(RegionId),
    #[error("region {0} not found in storage")]
    Missing(RegionId),
    #[error("storage i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegionId(pub usize);

impl std::fmt::Display for RegionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Device {
    Ram,
    Ssd,
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Local,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Fifo,
    Lru,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelConfig {
    #[serde(rename = "device-type")]
    pub device: Device,
    #[serde(rename = "capacity-bytes")]
    pub capacity: u64,
    /// Directory for payload files; payloads stay in memory when absent.
    #[serde(default)]
    pub path: Option<PathBuf>,
    pub visibility: Visibility,
    pub policy: Policy,
    #[serde(rename = "latency-ns-per-byte", default)]
    pub latency_ns_per_byte: f64,
}

impl LevelConfig {
    pub fn new(
        device: Device,
        capacity: u64,
        visibility: Visibility,
        policy: Policy,
        latency_ns_per_byte: f64,
    ) -> Self {
        Self {
            device,
            capacity,
            path: None,
            visibility,
            policy,
            latency_ns_per_byte,
        }
    }
}

/// Ordered storage levels, fastest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StorageConfig {
    pub levels: Vec<LevelConfig>,
}

impl Default for StorageConfig {
    /// Local RAM (64 MiB, LRU) over an unbounded global file system.
    fn default() -> Self {
        Self {
            levels: vec![
                LevelConfig::new(Device::Ram, 64 << 20, Visibility::Local, Policy::Lru, 0.1),
                LevelConfig::new(
                    Device::Disk,
                    u64::MAX,
                    Visibility::Global,
                    Policy::Fifo,
                    5.0,
                ),
            ],
        }
    }
}

impl StorageConfig {
    pub fn validate(&self) -> Result<(), StorageError> {
        let bad = |m: &str| Err(StorageError::InvalidConfig(m.to_string()));
        if self.levels.is_empty() {
            return bad("at least one storage level is required");
        }
        if let Some(first_global) = self
            .levels
            .iter()
            .position(|l| l.visibility == Visibility::Global)
        {
            if self.levels[first_global..]
                .iter()
                .any(|l| l.visibility == Visibility::Local)
            {
                return bad("local levels must precede global levels");
            }
        } else {
            return bad("at least one global level is required to exchange data between workers");
        }
        for (i, l) in self.levels.iter().enumerate() {
            if l.capacity == 0 {
                return bad(&format!("level {i} has zero capacity"));
            }
            if !(l.latency_ns_per_byte.is_finite() && l.latency_ns_per_byte >= 0.0) {
                return bad(&format!(
                    "level {i} latency must be finite and non-negative"
                ));
            }
        }
        Ok(())
    }
}

/// How a retrieval was served.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RetrievalCase {
    /// Found in the requester's local storage.
    Local = 1,
    /// Found in global storage.
    Global = 2,
    /// Held only by another worker; moved to global storage first.
    Remote = 3,
}

#[derive(Debug, Clone)]
pub struct Retrieval {
    pub payload: Arc<Vec<u8>>,
    pub case: RetrievalCase,
    /// Config index of the level that served the read.
    pub level: usize,
    pub cost_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub level: usize,
    pub cost_ns: f64,
}

/// A storage-side event; the runtime stamps it with time and worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorageEvent {
    pub kind: &'static str,
    pub region: RegionId,
    /// Config index of the level.
    pub level: usize,
    /// Owning worker of a local level, `None` for global levels.
    pub owner: Option<usize>,
    pub case: Option<u8>,
    /// Occupied bytes of the level instance after the operation.
    pub occupied: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LevelStats {
    pub hits: u64,
    pub misses: u64,
    pub bytes_staged: u64,
    pub evictions: u64,
    pub deletions: u64,
}

#[derive(Debug, Clone)]
enum Payload {
    Memory(Arc<Vec<u8>>),
    File(PathBuf),
}

#[derive(Debug)]
struct Instance {
    cfg: usize,
    owner: Option<usize>,
    used: u64,
    /// Replacement order, front = next victim.
    order: VecDeque<RegionId>,
    entries: HashMap<RegionId, (u64, Payload)>,
    dir: Option<PathBuf>,
}

#[derive(Debug)]
pub struct Storage {
    config: StorageConfig,
    instances: Vec<Instance>,
    /// Instance indices visible to each worker, fastest first.
    views: Vec<Vec<usize>>,
    location: HashMap<RegionId, usize>,
    consumers: HashMap<RegionId, usize>,
    stats: Vec<LevelStats>,
    events: Vec<StorageEvent>,
}

impl Storage {
    pub fn new(config: &StorageConfig, workers: usize) -> Result<Self, StorageError> {
        config.validate()?;
        if workers == 0 {
            return Err(StorageError::InvalidConfig(
                "at least one worker is required".into(),
            ));
        }
        let mut instances = Vec::new();
        let mut views = vec![Vec::new(); workers];
        for (cfg, level) in config.levels.iter().enumerate() {
            let owners: Vec<Option<usize>> = match level.visibility {
                Visibility::Local => (0..workers).map(Some).collect(),
                Visibility::Global => vec![None],
            };
            for owner in owners {
                let dir = match &level.path {
                    Some(p) => {
                        let scope = owner.map_or_else(|| "global".to_string(), |w| format!("w{w}"));
                        let d = p.join(format!("level{cfg}-{scope}"));
                        fs::create_dir_all(&d)?;
                        Some(d)
                    }
                    None => None,
                };
                let idx = instances.len();
                instances.push(Instance {
                    cfg,
                    owner,
                    used: 0,
                    order: VecDeque::new(),
                    entries: HashMap::new(),
                    dir,
                });
                match owner {
                    Some(w) => views[w].push(idx),
                    None => views.iter_mut().for_each(|v| v.push(idx)),
                }
            }
        }
        Ok(Self {
            stats: vec![LevelStats::default(); config.levels.len()],
            config: config.clone(),
            instances,
            views,
            location: HashMap::new(),
            consumers: HashMap::new(),
            events: Vec::new(),
        })
    }

    pub fn config(&self) -> &StorageConfig {
        &self.config
    }

    pub fn stats(&self) -> &[LevelStats] {
        &self.stats
    }

    pub fn drain_events(&mut self) -> Vec<StorageEvent> {
        std::mem::take(&mut self.events)
    }

    /// Declares how many reads a region will receive. Regions without a
    /// declared count are never considered consumed.
    pub fn set_consumers(&mut self, region: RegionId, count: usize) {
        self.consumers.insert(region, count);
    }

    /// Records one completed (or cancelled) read of `region`.
    pub fn consumed(&mut self, region: RegionId) {
        if let Some(c) = self.consumers.get_mut(&region) {
            *c = c.saturating_sub(1);
        }
    }

    fn is_dead(&self, region: RegionId) -> bool {
        self.consumers.get(&region) == Some(&0)
    }

    pub fn contains(&self, region: RegionId) -> bool {
        self.location.contains_key(&region)
    }

    /// `(config level, owner)` of the level holding `region`.
    pub fn location(&self, region: RegionId) -> Option<(usize, Option<usize>)> {
        self.location
            .get(&region)
            .map(|&i| (self.instances[i].cfg, self.instances[i].owner))
    }

    /// Bytes of `region` resident in `worker`'s local levels.
    pub fn local_bytes(&self, region: RegionId, worker: usize) -> u64 {
        match self.location.get(&region) {
            Some(&i) if self.instances[i].owner == Some(worker) => {
                self.instances[i].entries[&region].0
            }
            _ => 0,
        }
    }

    /// Occupied bytes of every level instance: `(config level, owner, used)`.
    pub fn occupancy(&self) -> Vec<(usize, Option<usize>, u64)> {
        self.instances
            .iter()
            .map(|i| (i.cfg, i.owner, i.used))
            .collect()
    }

    fn latency(&self, inst: usize) -> f64 {
        self.config.levels[self.instances[inst].cfg].latency_ns_per_byte
    }

    fn event(&mut self, kind: &'static str, region: RegionId, inst: usize, case: Option<u8>) {
        let i = &self.instances[inst];
        self.events.push(StorageEvent {
            kind,
            region,
            level: i.cfg,
            owner: i.owner,
            case,
            occupied: i.used,
        });
    }

    /// Stores a freshly produced region on behalf of `worker`.
    pub fn put(
        &mut self,
        region: RegionId,
        payload: Arc<Vec<u8>>,
        worker: usize,
    ) -> Result<Placement, StorageError> {
        let size = payload.len() as u64;
        let view = self.views[worker].clone();
        let pos = view
            .iter()
            .position(|&i| self.config.levels[self.instances[i].cfg].capacity >= size)
            .ok_or(StorageError::Unstorable(region, size))?;
        let cost = self.insert(&view, pos, region, size, Payload::Memory(payload))?;
        let inst = view[pos];
        self.event("put", region, inst, None);
        Ok(Placement {
            level: self.instances[inst].cfg,
            cost_ns: cost,
        })
    }

    /// Inserts into `view[pos]`, evicting victims downwards. Returns the
    /// simulated write cost including demotions.
    fn insert(
        &mut self,
        view: &[usize],
        pos: usize,
        region: RegionId,
        size: u64,
        payload: Payload,
    ) -> Result<f64, StorageError> {
        let inst = view[pos];
        let cfg = self.instances[inst].cfg;
        let capacity = self.config.levels[cfg].capacity;
        let lowest = pos + 1 == view.len();
        let mut cost = size as f64 * self.latency(inst);

        let mut skipped = 0;
        while capacity - self.instances[inst].used < size {
            let Some(&victim) = self.instances[inst].order.get(skipped) else {
                return Err(StorageError::Full(region));
            };
            if self.is_dead(victim) {
                self.remove(inst, victim)?;
                self.stats[cfg].deletions += 1;
                self.event("delete", victim, inst, None);
            } else if lowest {
                // live data cannot leave the hierarchy
                skipped += 1;
            } else {
                let (vsize, vpayload) = self.detach(inst, victim)?;
                self.stats[cfg].evictions += 1;
                self.event("evict", victim, inst, None);
                // a victim that no longer fits below keeps moving down
                let mut next = pos + 1;
                while self.config.levels[self.instances[view[next]].cfg].capacity < vsize {
                    next += 1;
                    if next == view.len() {
                        return Err(StorageError::Full(victim));
                    }
                }
                cost += self.insert(view, next, victim, vsize, vpayload)?;
                self.event("demote", victim, view[next], None);
            }
        }
        self.attach(inst, region, size, payload)?;
        self.stats[cfg].bytes_staged += size;
        Ok(cost)
    }

    fn attach(
        &mut self,
        inst: usize,
        region: RegionId,
        size: u64,
        payload: Payload,
    ) -> Result<(), StorageError> {
        let payload = match (&self.instances[inst].dir, payload) {
            (Some(dir), p) => {
                let file = dir.join(format!("{region}.bin"));
                match p {
                    Payload::Memory(bytes) => fs::write(&file, bytes.as_slice())?,
                    Payload::File(old) => {
                        fs::copy(&old, &file)?;
                        fs::remove_file(&old)?;
                    }
                }
                Payload::File(file)
            }
            (None, Payload::File(old)) => {
                let bytes = fs::read(&old)?;
                fs::remove_file(&old)?;
                Payload::Memory(Arc::new(bytes))
            }
            (None, p) => p,
        };
        let i = &mut self.instances[inst];
        i.used += size;
        i.order.push_back(region);
        i.entries.insert(region, (size, payload));
        self.location.insert(region, inst);
        Ok(())
    }

    fn detach(&mut self, inst: usize, region: RegionId) -> Result<(u64, Payload), StorageError> {
        let i = &mut self.instances[inst];
        let entry = i
            .entries
            .remove(&region)
            .ok_or(StorageError::Missing(region))?;
        i.order.retain(|&r| r != region);
        i.used -= entry.0;
        self.location.remove(&region);
        Ok(entry)
    }

    fn remove(&mut self, inst: usize, region: RegionId) -> Result<(), StorageError> {
        if let (_, Payload::File(f)) = self.detach(inst, region)? {
            fs::remove_file(f)?;
        }
        Ok(())
    }

    fn read(&self, inst: usize, region: RegionId) -> Result<Arc<Vec<u8>>, StorageError> {
        match &self.instances[inst].entries[&region].1 {
            Payload::Memory(b) => Ok(b.clone()),
            Payload::File(f) => Ok(Arc::new(fs::read(f)?)),
        }
    }

    fn touch(&mut self, inst: usize, region: RegionId) {
        if self.config.levels[self.instances[inst].cfg].policy == Policy::Lru {
            let order = &mut self.instances[inst].order;
            order.retain(|&r| r != region);
            order.push_back(region);
        }
    }

    /// Reads `region` for `worker`. Levels searched before the one holding
    /// the region count as misses; the holding level counts a hit.
    pub fn get(&mut self, region: RegionId, worker: usize) -> Result<Retrieval, StorageError> {
        let &inst = self
            .location
            .get(&region)
            .ok_or(StorageError::Missing(region))?;
        let view = self.views[worker].clone();
        let size = self.instances[inst].entries[&region].0;
        if let Some(pos) = view.iter().position(|&i| i == inst) {
            for &missed in &view[..pos] {
                self.stats[self.instances[missed].cfg].misses += 1;
            }
            let cfg = self.instances[inst].cfg;
            self.stats[cfg].hits += 1;
            self.touch(inst, region);
            let case = match self.instances[inst].owner {
                Some(_) => RetrievalCase::Local,
                None => RetrievalCase::Global,
            };
            self.event("get", region, inst, Some(case as u8));
            return Ok(Retrieval {
                payload: self.read(inst, region)?,
                case,
                level: cfg,
                cost_ns: size as f64 * self.latency(inst),
            });
        }

        // Held in another worker's local level: the producer moves it to the
        // fastest global level that fits, then the requester reads it there.
        for &missed in &view {
            self.stats[self.instances[missed].cfg].misses += 1;
        }
        let read_src = size as f64 * self.latency(inst);
        let (_, payload) = self.detach(inst, region)?;
        self.event("promote-out", region, inst, None);
        let global_start = view
            .iter()
            .position(|&i| self.instances[i].owner.is_none())
            .expect("validated config has a global level");
        let pos = (global_start..view.len())
            .find(|&p| self.config.levels[self.instances[view[p]].cfg].capacity >= size)
            .ok_or(StorageError::Unstorable(region, size))?;
        let write = self.insert(&view, pos, region, size, payload)?;
        let dest = view[pos];
        self.event("promote-in", region, dest, None);
        self.event("get", region, dest, Some(RetrievalCase::Remote as u8));
        Ok(Retrieval {
            payload: self.read(dest, region)?,
            case: RetrievalCase::Remote,
            level: self.instances[dest].cfg,
            cost_ns: read_src + write + size as f64 * self.latency(dest),
        })
    }

    /// Drops every region that is fully consumed.
    pub fn release_dead(&mut self) -> Result<(), StorageError> {
        let dead: Vec<(RegionId, usize)> = self
            .location
            .iter()
            .filter(|(r, _)| self.is_dead(**r))
            .map(|(&r, &i)| (r, i))
            .collect();
        for (r, i) in dead {
            self.remove(i, r)?;
            self.stats[self.instances[i].cfg].deletions += 1;
            self.event("delete", r, i, None);
        }
        Ok(())
    }
}

impl Drop for Storage {
    fn drop(&mut self) {
        for inst in &self.instances {
            for (_, payload) in inst.entries.values() {
                if let Payload::File(f) = payload {
                    let _ = fs::remove_file(f);
                }
            }
            if let Some(d) = &inst.dir {
                let _ = fs::remove_dir(d);
            }
        }
    }
}
