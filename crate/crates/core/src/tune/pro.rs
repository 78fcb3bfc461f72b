//! Parallel Rank Order: a simplex of K points that reflects, expands or
//! shrinks all non-best vertices around the best one each round, so every
//! round is one batch of up to K - 1 evaluations.

use super::{along, axis_neighbors, initial_simplex, to_unit, Proposal, Tuner};
use crate::space::{ParamSet, ParameterSpace};

/// One PRO transformation of `v` around the best vertex `b` (unit space):
/// reflection `b + (b - v)`, expansion `b + 2(r - b)` of a reflected point,
/// or shrink `b + (v - b) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProMove {
    Reflect,
    Expand,
    Shrink,
}

/// Applies `mv` to `v` around `b` and snaps to the grid.
pub fn pro_step(space: &ParameterSpace, b: &[f64], v: &[f64], mv: ProMove) -> ParamSet {
    match mv {
        ProMove::Reflect => along(space, b, v, -1.0),
        ProMove::Expand => along(space, b, v, 2.0),
        ProMove::Shrink => along(space, b, v, 0.5),
    }
}

#[derive(Debug, Clone)]
struct Vertex {
    p: ParamSet,
    u: Vec<f64>,
    f: f64,
}

#[derive(Debug, Clone)]
enum State {
    Init(Vec<ParamSet>),
    Idle,
    Reflect(Vec<(usize, ParamSet)>),
    Expand {
        reflected: Vec<(usize, ParamSet, f64)>,
        expanded: Vec<(usize, ParamSet)>,
    },
    Shrink(Vec<(usize, ParamSet)>),
    /// The simplex can no longer move: poll the axis neighbours of the best
    /// vertex in batches of at most K - 1 and restart around the best
    /// improvement.
    Poll {
        best: f64,
        queue: Vec<ParamSet>,
    },
    Done,
}

#[derive(Debug, Clone)]
pub struct Pro {
    space: ParameterSpace,
    simplex: Vec<Vertex>,
    init: Vec<ParamSet>,
    points: usize,
    step: f64,
    state: State,
}

impl Pro {
    pub fn new(space: ParameterSpace, points: usize, initial_step: f64) -> Self {
        let mut pro = Self {
            state: State::Idle,
            init: Vec::new(),
            simplex: Vec::new(),
            points: points.max(2),
            step: initial_step * 2.0,
            space,
        };
        pro.restart(pro.space.center());
        pro
    }

    /// Rebuilds the simplex around `p` with half the previous offset. The
    /// first round evaluates `p` alone, the second the other vertices.
    fn restart(&mut self, p: ParamSet) {
        self.step /= 2.0;
        let init = initial_simplex(&self.space, &p, self.points, self.step);
        self.simplex.clear();
        self.state = State::Init(vec![init[0].clone()]);
        self.init = init[1..].to_vec();
    }

    fn poll(&mut self) {
        let best = &self.simplex[self.best()];
        self.state = State::Poll {
            best: best.f,
            queue: axis_neighbors(&self.space, &best.p),
        };
    }

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

    fn best(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.simplex.iter().enumerate() {
            if v.f > self.simplex[best].f {
                best = i;
            }
        }
        best
    }

    fn taken(&self, p: &ParamSet, extra: &[(usize, ParamSet)]) -> bool {
        self.simplex.iter().any(|v| &v.p == p) || extra.iter().any(|(_, q)| q == p)
    }

    fn plan(&mut self) {
        if self.simplex.len() < 2 || self.simplex.windows(2).all(|w| w[0].p == w[1].p) {
            self.poll();
            return;
        }
        let best = self.best();
        let b = self.simplex[best].u.clone();
        let mut cands: Vec<(usize, ParamSet)> = Vec::new();
        for j in 0..self.simplex.len() {
            if j == best {
                continue;
            }
            let r = pro_step(&self.space, &b, &self.simplex[j].u, ProMove::Reflect);
            if !self.taken(&r, &cands) {
                cands.push((j, r));
            }
        }
        if cands.is_empty() {
            self.shrink(best);
        } else {
            self.state = State::Reflect(cands);
        }
    }

    /// Shrinks all non-best vertices halfway to the best. Vertices landing
    /// on the best collapse onto it without an evaluation; if nothing moves
    /// the search is stuck and stops.
    fn shrink(&mut self, best: usize) {
        let b = self.simplex[best].clone();
        let mut moved = false;
        let mut cands = Vec::new();
        for j in 0..self.simplex.len() {
            if j == best {
                continue;
            }
            let s = pro_step(&self.space, &b.u, &self.simplex[j].u, ProMove::Shrink);
            if s == self.simplex[j].p {
                continue;
            }
            moved = true;
            if s == b.p {
                self.simplex[j] = b.clone();
            } else {
                cands.push((j, s));
            }
        }
        match (moved, cands.is_empty()) {
            (false, _) => self.poll(),
            (true, true) => self.state = State::Idle,
            (true, false) => self.state = State::Shrink(cands),
        }
    }

    fn accept(&mut self, moves: Vec<(usize, ParamSet, f64)>) {
        for (j, p, f) in moves {
            self.simplex[j] = self.vertex(p, f);
        }
    }
}

impl Tuner for Pro {
    fn propose(&mut self) -> Proposal {
        loop {
            let pts = |v: &[(usize, ParamSet)]| v.iter().map(|(_, p)| p.clone()).collect();
            match &self.state {
                State::Init(pending) if pending.is_empty() => self.state = State::Idle,
                State::Init(pending) => return Proposal::Batch(pending.clone()),
                State::Idle => self.plan(),
                State::Reflect(c) | State::Shrink(c) => return Proposal::Batch(pts(c)),
                State::Expand { expanded, .. } => return Proposal::Batch(pts(expanded)),
                State::Poll { queue, .. } if queue.is_empty() => self.state = State::Done,
                State::Poll { queue, .. } => {
                    let n = queue.len().min(self.points - 1);
                    return Proposal::Batch(queue[..n].to_vec());
                }
                State::Done => return Proposal::Done,
            }
        }
    }

    fn update(&mut self, scores: &[f64]) {
        match std::mem::replace(&mut self.state, State::Idle) {
            State::Init(pending) => {
                for (p, &f) in pending.into_iter().zip(scores) {
                    let v = self.vertex(p, f);
                    self.simplex.push(v);
                }
                self.state = State::Init(std::mem::take(&mut self.init));
            }
            State::Reflect(cands) => {
                let best = self.best();
                let best_f = self.simplex[best].f;
                let reflected: Vec<(usize, ParamSet, f64)> = cands
                    .into_iter()
                    .zip(scores)
                    .map(|((j, p), &f)| (j, p, f))
                    .collect();
                if !reflected.iter().any(|r| r.2 > best_f) {
                    self.shrink(best);
                    return;
                }
                let b = self.simplex[best].u.clone();
                let mut expanded: Vec<(usize, ParamSet)> = Vec::new();
                for (j, r, _) in &reflected {
                    let e = pro_step(&self.space, &b, &to_unit(&self.space, r), ProMove::Expand);
                    let clash = &e == r || reflected.iter().any(|x| x.1 == e);
                    if !clash && !self.taken(&e, &expanded) {
                        expanded.push((*j, e));
                    }
                }
                if expanded.is_empty() {
                    self.accept(reflected);
                } else {
                    self.state = State::Expand {
                        reflected,
                        expanded,
                    };
                }
            }
            State::Expand {
                reflected,
                expanded,
            } => {
                let best_r = reflected
                    .iter()
                    .map(|r| r.2)
                    .fold(f64::NEG_INFINITY, f64::max);
                let best_e = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if best_e > best_r {
                    let mut moves = reflected;
                    for ((j, e), &f) in expanded.into_iter().zip(scores) {
                        let slot = moves
                            .iter_mut()
                            .find(|m| m.0 == j)
                            .expect("expanded from a reflection");
                        *slot = (j, e, f);
                    }
                    self.accept(moves);
                } else {
                    self.accept(reflected);
                }
            }
            State::Shrink(cands) => {
                let moves = cands
                    .into_iter()
                    .zip(scores)
                    .map(|((j, p), &f)| (j, p, f))
                    .collect();
                self.accept(moves);
            }
            State::Poll { best, mut queue } => {
                let batch: Vec<ParamSet> = queue.drain(..scores.len().min(queue.len())).collect();
                let mut top: Option<(usize, f64)> = None;
                for (i, &f) in scores.iter().enumerate() {
                    if f > best && top.is_none_or(|(_, t)| f > t) {
                        top = Some((i, f));
                    }
                }
                match top {
                    Some((i, _)) => self.restart(batch[i].clone()),
                    None => self.state = State::Poll { best, queue },
                }
            }
            s @ (State::Idle | State::Done) => self.state = s,
        }
    }
}
