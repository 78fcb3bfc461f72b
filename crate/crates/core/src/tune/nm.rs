//! Nelder–Mead simplex search on the grid, one evaluation per round.

use std::collections::VecDeque;

use super::{along, axis_neighbors, initial_simplex, to_unit, Proposal, Tuner};
use crate::space::{ParamSet, ParameterSpace};

const REFLECT: f64 = 2.0;
const EXPAND: f64 = 3.0;
const CONTRACT: f64 = 0.5;

/// `v_r + alpha * (c - v_r)` in unit space, snapped to the grid: the
/// reflection (alpha 2), expansion (3) and contraction (0.5) of the
/// replaced vertex `v_r` through the centroid `c` of the others.
pub fn nm_step(space: &ParameterSpace, v_r: &[f64], c: &[f64], alpha: f64) -> ParamSet {
    along(space, v_r, c, alpha)
}

#[derive(Debug, Clone)]
struct Vertex {
    p: ParamSet,
    u: Vec<f64>,
    f: f64,
}

#[derive(Debug, Clone)]
enum State {
    Init(VecDeque<ParamSet>),
    Idle,
    Reflect {
        worst: usize,
        centroid: Vec<f64>,
        r: ParamSet,
    },
    Expand {
        worst: usize,
        r: ParamSet,
        f_r: f64,
        e: ParamSet,
    },
    Contract {
        worst: usize,
        c: ParamSet,
    },
    Shrink(VecDeque<(usize, ParamSet)>),
    /// The simplex can no longer move: try the axis neighbours of the best
    /// vertex one at a time and restart around the first improvement.
    Poll {
        best: f64,
        queue: VecDeque<ParamSet>,
    },
    Done,
}

#[derive(Debug, Clone)]
pub struct NelderMead {
    space: ParameterSpace,
    simplex: Vec<Vertex>,
    step: f64,
    state: State,
}

impl NelderMead {
    pub fn new(space: ParameterSpace, initial_step: f64) -> Self {
        let init = initial_simplex(&space, &space.center(), space.k() + 1, initial_step);
        Self {
            space,
            simplex: Vec::new(),
            step: initial_step,
            state: State::Init(init.into()),
        }
    }

    /// Current simplex vertices with their scores.
    pub fn simplex(&self) -> Vec<(ParamSet, f64)> {
        self.simplex.iter().map(|v| (v.p.clone(), v.f)).collect()
    }

    fn vertex(&self, p: ParamSet, f: f64) -> Vertex {
        Vertex {
            u: to_unit(&self.space, &p),
            p,
            f,
        }
    }

    /// Vertex indices from best to worst; ties keep simplex order.
    fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.simplex.len()).collect();
        idx.sort_by(|&a, &b| self.simplex[b].f.total_cmp(&self.simplex[a].f));
        idx
    }

    fn is_vertex(&self, p: &ParamSet) -> bool {
        self.simplex.iter().any(|v| &v.p == p)
    }

    fn collapsed(&self) -> bool {
        self.simplex.windows(2).all(|w| w[0].p == w[1].p)
    }

    fn centroid_without(&self, skip: usize) -> Vec<f64> {
        let k = self.space.k();
        let n = (self.simplex.len() - 1) as f64;
        let mut c = vec![0.0; k];
        for (i, v) in self.simplex.iter().enumerate() {
            if i != skip {
                for (ci, ui) in c.iter_mut().zip(&v.u) {
                    *ci += ui / n;
                }
            }
        }
        c
    }

    fn plan(&mut self) {
        if self.simplex.len() < 2 || self.collapsed() {
            self.state = self.poll();
            return;
        }
        let worst = *self.ranking().last().unwrap();
        let centroid = self.centroid_without(worst);
        let r = nm_step(&self.space, &self.simplex[worst].u, &centroid, REFLECT);
        self.state = if self.is_vertex(&r) {
            self.contract_or_shrink(worst, &centroid)
        } else {
            State::Reflect { worst, centroid, r }
        };
    }

    fn contract_or_shrink(&self, worst: usize, centroid: &[f64]) -> State {
        let c = nm_step(&self.space, &self.simplex[worst].u, centroid, CONTRACT);
        if self.is_vertex(&c) {
            self.shrink()
        } else {
            State::Contract { worst, c }
        }
    }

    /// Moves every non-best vertex halfway toward the best. Vertices that
    /// would not move are left alone; if none moves the search is stuck.
    fn shrink(&self) -> State {
        let best = self.ranking()[0];
        let b = &self.simplex[best].u;
        let moves: VecDeque<_> = self
            .simplex
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != best)
            .map(|(i, v)| (i, along(&self.space, b, &v.u, CONTRACT)))
            .filter(|(i, s)| &self.simplex[*i].p != s)
            .collect();
        if moves.is_empty() {
            self.poll()
        } else {
            State::Shrink(moves)
        }
    }

    fn poll(&self) -> State {
        let best = &self.simplex[self.ranking()[0]];
        State::Poll {
            best: best.f,
            queue: axis_neighbors(&self.space, &best.p).into(),
        }
    }

    /// Rebuilds the simplex around `p` with half the previous offset.
    fn restart(&mut self, p: ParamSet) {
        self.step /= 2.0;
        let init = initial_simplex(&self.space, &p, self.space.k() + 1, self.step);
        self.simplex.clear();
        self.state = State::Init(init.into());
    }

    fn replace(&mut self, i: usize, p: ParamSet, f: f64) {
        self.simplex[i] = self.vertex(p, f);
    }
}

impl Tuner for NelderMead {
    fn propose(&mut self) -> Proposal {
        loop {
            match &self.state {
                State::Init(q) => match q.front() {
                    Some(p) => return Proposal::Batch(vec![p.clone()]),
                    None => self.state = State::Idle,
                },
                State::Idle => self.plan(),
                State::Reflect { r, .. } => return Proposal::Batch(vec![r.clone()]),
                State::Expand { e, .. } => return Proposal::Batch(vec![e.clone()]),
                State::Contract { c, .. } => return Proposal::Batch(vec![c.clone()]),
                State::Shrink(q) => return Proposal::Batch(vec![q[0].1.clone()]),
                State::Poll { queue, .. } => match queue.front() {
                    Some(p) => return Proposal::Batch(vec![p.clone()]),
                    None => self.state = State::Done,
                },
                State::Done => return Proposal::Done,
            }
        }
    }

    fn update(&mut self, scores: &[f64]) {
        let Some(&f) = scores.first() else { return };
        match std::mem::replace(&mut self.state, State::Idle) {
            State::Init(mut q) => {
                let p = q.pop_front().expect("pending initial vertex");
                let v = self.vertex(p, f);
                self.simplex.push(v);
                self.state = State::Init(q);
            }
            State::Reflect { worst, centroid, r } => {
                let rank = self.ranking();
                let best_f = self.simplex[rank[0]].f;
                let second_worst_f = self.simplex[rank[rank.len() - 2]].f;
                if f > best_f {
                    let e = nm_step(&self.space, &self.simplex[worst].u, &centroid, EXPAND);
                    if e == r || self.is_vertex(&e) {
                        self.replace(worst, r, f);
                    } else {
                        self.state = State::Expand {
                            worst,
                            r,
                            f_r: f,
                            e,
                        };
                    }
                } else if f > second_worst_f {
                    self.replace(worst, r, f);
                } else {
                    self.state = self.contract_or_shrink(worst, &centroid);
                }
            }
            State::Expand { worst, r, f_r, e } => {
                if f > f_r {
                    self.replace(worst, e, f);
                } else {
                    self.replace(worst, r, f_r);
                }
            }
            State::Contract { worst, c } => {
                if f > self.simplex[worst].f {
                    self.replace(worst, c, f);
                } else {
                    self.state = self.shrink();
                }
            }
            State::Shrink(mut q) => {
                let (i, s) = q.pop_front().expect("pending shrink vertex");
                self.replace(i, s, f);
                if !q.is_empty() {
                    self.state = State::Shrink(q);
                }
            }
            State::Poll { best, mut queue } => {
                let p = queue.pop_front().expect("pending poll point");
                if f > best {
                    self.restart(p);
                } else {
                    self.state = State::Poll { best, queue };
                }
            }
            s @ (State::Idle | State::Done) => self.state = s,
        }
    }
}
