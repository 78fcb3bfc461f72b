//! Static R-tree packed with sort-tile-recursive (STR) ordering.

use serde::{Deserialize, Serialize};

/// Axis-aligned box with inclusive integer bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub xmin: i64,
    pub ymin: i64,
    pub xmax: i64,
    pub ymax: i64,
}

impl Rect {
    pub const fn new(xmin: i64, ymin: i64, xmax: i64, ymax: i64) -> Self {
        Self {
            xmin,
            ymin,
            xmax,
            ymax,
        }
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.xmin <= other.xmax
            && other.xmin <= self.xmax
            && self.ymin <= other.ymax
            && other.ymin <= self.ymax
    }

    pub fn contains_point(&self, x: i64, y: i64) -> bool {
        (self.xmin..=self.xmax).contains(&x) && (self.ymin..=self.ymax).contains(&y)
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect::new(
            self.xmin.min(other.xmin),
            self.ymin.min(other.ymin),
            self.xmax.max(other.xmax),
            self.ymax.max(other.ymax),
        )
    }

    // doubled centre, keeps integer arithmetic
    fn center2(&self) -> (i64, i64) {
        (self.xmin + self.xmax, self.ymin + self.ymax)
    }
}

#[derive(Debug, Clone)]
struct Node {
    mbb: Rect,
    /// Index range into `entries` for leaves, into `nodes` otherwise.
    start: usize,
    end: usize,
    leaf: bool,
}

#[derive(Debug, Clone)]
pub struct RTree<T> {
    entries: Vec<(Rect, T)>,
    nodes: Vec<Node>,
    root: Option<usize>,
}

pub const DEFAULT_NODE_CAPACITY: usize = 16;

/// Reorders `items` in STR order: vertical slices by x centre, each slice
/// sorted by y centre.
fn str_sort<X>(items: &mut [X], capacity: usize, rect: impl Fn(&X) -> Rect) {
    let n = items.len();
    if n <= capacity {
        return;
    }
    let leaves = n.div_ceil(capacity);
    let slices = (leaves as f64).sqrt().ceil() as usize;
    let slice_len = slices * capacity;
    items.sort_by_key(|it| rect(it).center2().0);
    for chunk in items.chunks_mut(slice_len) {
        chunk.sort_by_key(|it| rect(it).center2().1);
    }
}

impl<T> RTree<T> {
    pub fn bulk_load(entries: Vec<(Rect, T)>) -> Self {
        Self::bulk_load_with_capacity(entries, DEFAULT_NODE_CAPACITY)
    }

    pub fn bulk_load_with_capacity(mut entries: Vec<(Rect, T)>, capacity: usize) -> Self {
        assert!(capacity >= 2, "node capacity must be at least 2");
        if entries.is_empty() {
            return Self {
                entries,
                nodes: Vec::new(),
                root: None,
            };
        }
        str_sort(&mut entries, capacity, |e| e.0);
        let mut level: Vec<Node> = entries
            .chunks(capacity)
            .enumerate()
            .map(|(i, chunk)| Node {
                mbb: chunk
                    .iter()
                    .skip(1)
                    .fold(chunk[0].0, |acc, e| acc.union(&e.0)),
                start: i * capacity,
                end: i * capacity + chunk.len(),
                leaf: true,
            })
            .collect();
        let mut nodes = Vec::new();
        loop {
            str_sort(&mut level, capacity, |n| n.mbb);
            let base = nodes.len();
            let count = level.len();
            nodes.append(&mut level);
            if count == 1 {
                break;
            }
            level = nodes[base..base + count]
                .chunks(capacity)
                .enumerate()
                .map(|(i, chunk)| Node {
                    mbb: chunk
                        .iter()
                        .skip(1)
                        .fold(chunk[0].mbb, |acc, n| acc.union(&n.mbb)),
                    start: base + i * capacity,
                    end: base + i * capacity + chunk.len(),
                    leaf: false,
                })
                .collect();
        }
        let root = Some(nodes.len() - 1);
        Self {
            entries,
            nodes,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All entries whose box intersects `window`.
    pub fn query(&self, window: &Rect) -> Vec<&(Rect, T)> {
        let mut out = Vec::new();
        let Some(root) = self.root else {
            return out;
        };
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if !node.mbb.intersects(window) {
                continue;
            }
            if node.leaf {
                out.extend(
                    self.entries[node.start..node.end]
                        .iter()
                        .filter(|e| e.0.intersects(window)),
                );
            } else {
                stack.extend(node.start..node.end);
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        let mut depth = 0;
        let mut cur = self.root;
        while let Some(i) = cur {
            depth += 1;
            let n = &self.nodes[i];
            cur = (!n.leaf).then_some(n.start);
        }
        depth
    }
}
