//! Run-based connected-component labeling.
//!
//! Each row is split into maximal foreground runs; runs on consecutive rows
//! that touch are merged with a union-find. 4-connectivity requires the runs
//! to share a column, 8-connectivity also accepts diagonal contact.

use serde::{Deserialize, Serialize};

use super::{Mask, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

/// Horizontal run `[x_start, x_end)` on row `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Run {
    pub y: usize,
    pub x_start: usize,
    pub x_end: usize,
}

impl Run {
    pub fn len(&self) -> usize {
        self.x_end - self.x_start
    }

    pub fn is_empty(&self) -> bool {
        self.x_end == self.x_start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegObject {
    pub id: u32,
    /// Sorted by `(y, x_start)`.
    pub runs: Vec<Run>,
    pub area: usize,
    pub mbb: Rect,
    pub centroid: (f64, f64),
}

impl SegObject {
    fn from_runs(id: u32, mut runs: Vec<Run>) -> Self {
        runs.sort();
        let area = runs.iter().map(Run::len).sum::<usize>();
        let mut mbb = Rect::new(i64::MAX, i64::MAX, i64::MIN, i64::MIN);
        let (mut sx, mut sy) = (0.0, 0.0);
        for r in &runs {
            mbb.xmin = mbb.xmin.min(r.x_start as i64);
            mbb.xmax = mbb.xmax.max(r.x_end as i64 - 1);
            mbb.ymin = mbb.ymin.min(r.y as i64);
            mbb.ymax = mbb.ymax.max(r.y as i64);
            let len = r.len() as f64;
            // sum of x over x_start..x_end
            sx += len * (r.x_start + r.x_end - 1) as f64 / 2.0;
            sy += len * r.y as f64;
        }
        Self {
            id,
            runs,
            area,
            mbb,
            centroid: (sx / area as f64, sy / area as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectMask {
    pub mask: Mask,
    pub connectivity: Connectivity,
    /// In raster-scan order of each object's first pixel.
    pub objects: Vec<SegObject>,
}

impl ObjectMask {
    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }
}

fn row_runs(mask: &Mask, y: usize) -> Vec<Run> {
    let mut runs = Vec::new();
    let mut x = 0;
    let w = mask.width();
    while x < w {
        if mask.is_foreground(x, y) {
            let start = x;
            while x < w && mask.is_foreground(x, y) {
                x += 1;
            }
            runs.push(Run {
                y,
                x_start: start,
                x_end: x,
            });
        } else {
            x += 1;
        }
    }
    runs
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // keep the earlier run as root so ids follow scan order
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

pub fn extract_objects(mask: &Mask, connectivity: Connectivity) -> ObjectMask {
    let mut runs: Vec<Run> = Vec::new();
    let mut row_start = Vec::with_capacity(mask.height() + 1);
    for y in 0..mask.height() {
        row_start.push(runs.len());
        runs.extend(row_runs(mask, y));
    }
    row_start.push(runs.len());

    let slack = match connectivity {
        Connectivity::Four => 0,
        Connectivity::Eight => 1,
    };
    let mut parent: Vec<usize> = (0..runs.len()).collect();
    for y in 1..mask.height() {
        let prev = row_start[y - 1]..row_start[y];
        let cur = row_start[y]..row_start[y + 1];
        let mut j = prev.start;
        for i in cur {
            let r = runs[i];
            // skip previous-row runs that end too far left
            while j < prev.end && runs[j].x_end + slack <= r.x_start {
                j += 1;
            }
            let mut m = j;
            while m < prev.end && runs[m].x_start < r.x_end + slack {
                union(&mut parent, i, m);
                m += 1;
            }
        }
    }

    let mut label_of_root = vec![u32::MAX; runs.len()];
    let mut grouped: Vec<Vec<Run>> = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let root = find(&mut parent, i);
        if label_of_root[root] == u32::MAX {
            label_of_root[root] = grouped.len() as u32;
            grouped.push(Vec::new());
        }
        grouped[label_of_root[root] as usize].push(*run);
    }
    let objects = grouped
        .into_iter()
        .enumerate()
        .map(|(id, runs)| SegObject::from_runs(id as u32, runs))
        .collect();
    ObjectMask {
        mask: mask.clone(),
        connectivity,
        objects,
    }
}

/// Paints objects back into a `width` x `height` mask (foreground 255).
pub fn rasterize(width: usize, height: usize, objects: &[SegObject]) -> Mask {
    let mut mask = Mask::empty(width, height);
    for obj in objects {
        for r in &obj.runs {
            for x in r.x_start..r.x_end {
                mask.set(x, r.y, 255);
            }
        }
    }
    mask
}
