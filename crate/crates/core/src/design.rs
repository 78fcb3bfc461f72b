//! Sampling designs over a [`ParameterSpace`]: Monte Carlo, Latin hypercube,
//! Morris trajectories and Saltelli's A/B/A_B block layout.
//!
//! All generators draw from [`crate::rng::seeded`], so a design is fully
//! determined by `(space, arguments, seed)`.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::space::{ParamSet, ParameterSpace, SpaceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    MonteCarlo,
    Lhs,
    Morris,
    Saltelli,
}

/// One move inside a Morris trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorrisStep {
    pub axis: usize,
    /// Signed perturbation in unit space.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorrisMeta {
    pub r: usize,
    /// Level-count override `p`, when one was given.
    pub p: Option<usize>,
    /// Realized per-axis step in unit space after snapping to the grid.
    pub delta: Vec<f64>,
    /// Realized per-axis step in grid levels.
    pub delta_levels: Vec<usize>,
    /// `trajectories[t][j]` moves point `t*(k+1)+j` to point `t*(k+1)+j+1`.
    pub trajectories: Vec<Vec<MorrisStep>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaltelliMeta {
    pub n: usize,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaltelliBlock {
    A,
    B,
    /// `A` with column `i` taken from `B`.
    AB(usize),
}

impl SaltelliMeta {
    pub fn block(&self, block: SaltelliBlock) -> Range<usize> {
        let start = match block {
            SaltelliBlock::A => 0,
            SaltelliBlock::B => self.n,
            SaltelliBlock::AB(i) => (2 + i) * self.n,
        };
        start..start + self.n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DesignMeta {
    MonteCarlo,
    /// Unit-space coordinates before snapping, `unit[point][axis]`.
    Lhs {
        unit: Vec<Vec<f64>>,
    },
    Morris(MorrisMeta),
    Saltelli(SaltelliMeta),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDesign {
    pub kind: DesignKind,
    pub seed: u64,
    pub points: Vec<ParamSet>,
    pub meta: DesignMeta,
}

impl SampleDesign {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Morris step `p / (2(p - 1))` in unit space.
pub fn morris_delta(p: usize) -> f64 {
    p as f64 / (2.0 * (p as f64 - 1.0))
}

pub fn sample_monte_carlo(
    space: &ParameterSpace,
    n: usize,
    seed: u64,
) -> Result<SampleDesign, SpaceError> {
    if n == 0 {
        return Err(SpaceError::EmptyDesign);
    }
    let mut rng = rng::seeded(seed);
    let points = (0..n).map(|_| random_point(space, &mut rng)).collect();
    Ok(SampleDesign {
        kind: DesignKind::MonteCarlo,
        seed,
        points,
        meta: DesignMeta::MonteCarlo,
    })
}

pub(crate) fn random_point<R: Rng>(space: &ParameterSpace, rng: &mut R) -> ParamSet {
    ParamSet::new(
        space
            .axes()
            .iter()
            .map(|a| rng.random_range(0..a.level_count()))
            .collect(),
    )
}

/// Latin hypercube: `n` equal strata per axis, one point per stratum, each
/// drawn uniformly inside its stratum and snapped to the nearest level.
pub fn sample_lhs(space: &ParameterSpace, n: usize, seed: u64) -> Result<SampleDesign, SpaceError> {
    if n == 0 {
        return Err(SpaceError::EmptyDesign);
    }
    let mut rng = rng::seeded(seed);
    let k = space.k();
    let mut unit = vec![vec![0.0; k]; n];
    #[allow(clippy::needless_range_loop)] // column-wise fill keeps the draw order per axis
    for j in 0..k {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (i, stratum) in strata.into_iter().enumerate() {
            let u: f64 = rng.random();
            unit[i][j] = (stratum as f64 + u) / n as f64;
        }
    }
    let points = unit
        .iter()
        .map(|row| {
            ParamSet::new(
                space
                    .axes()
                    .iter()
                    .zip(row)
                    .map(|(a, &u)| a.nearest_level(u))
                    .collect(),
            )
        })
        .collect();
    Ok(SampleDesign {
        kind: DesignKind::Lhs,
        seed,
        points,
        meta: DesignMeta::Lhs { unit },
    })
}

/// Morris one-at-a-time trajectories.
///
/// With `p = None` each axis uses its own level count as `p`. The unit step
/// is snapped to the nearest whole number of grid levels (at least one), and
/// starting levels are drawn per axis from the range where `+delta` stays on
/// the grid.
pub fn sample_morris(
    space: &ParameterSpace,
    r: usize,
    p: Option<usize>,
    seed: u64,
) -> Result<SampleDesign, SpaceError> {
    if r == 0 {
        return Err(SpaceError::InvalidArgument("r must be at least 1".into()));
    }
    if p.is_some_and(|p| p < 2) {
        return Err(SpaceError::InvalidArgument("p must be at least 2".into()));
    }
    let k = space.k();
    let mut delta_levels = Vec::with_capacity(k);
    let mut delta = Vec::with_capacity(k);
    for axis in space.axes() {
        let levels = axis.level_count();
        if levels < 2 {
            return Err(SpaceError::DesignInfeasible {
                axis: axis.name().to_string(),
                reason: "fewer than two levels".into(),
            });
        }
        let target = morris_delta(p.unwrap_or(levels));
        let steps = ((target * (levels - 1) as f64).round() as usize).clamp(1, levels - 1);
        delta_levels.push(steps);
        delta.push(steps as f64 / (levels - 1) as f64);
    }

    let mut rng = rng::seeded(seed);
    let mut points = Vec::with_capacity(r * (k + 1));
    let mut trajectories = Vec::with_capacity(r);
    for _ in 0..r {
        let mut current: Vec<usize> = space
            .axes()
            .iter()
            .zip(&delta_levels)
            .map(|(a, &s)| rng.random_range(0..a.level_count() - s))
            .collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);
        points.push(ParamSet::new(current.clone()));
        let mut steps = Vec::with_capacity(k);
        for axis in order {
            current[axis] += delta_levels[axis];
            points.push(ParamSet::new(current.clone()));
            steps.push(MorrisStep {
                axis,
                delta: delta[axis],
            });
        }
        trajectories.push(steps);
    }
    Ok(SampleDesign {
        kind: DesignKind::Morris,
        seed,
        points,
        meta: DesignMeta::Morris(MorrisMeta {
            r,
            p,
            delta,
            delta_levels,
            trajectories,
        }),
    })
}

/// Saltelli layout: blocks `A`, `B`, then `A_B^(i)` for every axis.
pub fn sample_saltelli(
    space: &ParameterSpace,
    n: usize,
    seed: u64,
) -> Result<SampleDesign, SpaceError> {
    if n < 2 {
        return Err(SpaceError::InvalidArgument("saltelli needs n >= 2".into()));
    }
    let k = space.k();
    let mut rng = rng::seeded(seed);
    let a: Vec<ParamSet> = (0..n).map(|_| random_point(space, &mut rng)).collect();
    let b: Vec<ParamSet> = (0..n).map(|_| random_point(space, &mut rng)).collect();
    let mut points = Vec::with_capacity(n * (k + 2));
    points.extend(a.iter().cloned());
    points.extend(b.iter().cloned());
    for i in 0..k {
        for (ra, rb) in a.iter().zip(&b) {
            let mut row = ra.clone();
            row.levels_mut()[i] = rb.levels()[i];
            points.push(row);
        }
    }
    Ok(SampleDesign {
        kind: DesignKind::Saltelli,
        seed,
        points,
        meta: DesignMeta::Saltelli(SaltelliMeta { n, k }),
    })
}
