//! Generational genetic algorithm over grid levels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Proposal, TuneError, Tuner};
use crate::rng::{seeded, StudyRng};
use crate::space::{ParamSet, ParameterSpace};

fn default_population() -> usize {
    10
}

fn default_generations() -> usize {
    10
}

fn default_selection() -> f64 {
    0.2
}

fn default_mutation() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GaConfig {
    #[serde(default = "default_population")]
    pub population: usize,
    #[serde(default = "default_generations")]
    pub generations: usize,
    /// Fraction of the population copied over the worst individuals.
    #[serde(default = "default_selection")]
    pub selection: f64,
    /// Per-gene probability of being redrawn uniformly.
    #[serde(default = "default_mutation")]
    pub mutation: f64,
    /// Use this crossover cut instead of a random one.
    #[serde(default)]
    pub fixed_cut: Option<usize>,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: default_population(),
            generations: default_generations(),
            selection: default_selection(),
            mutation: default_mutation(),
            fixed_cut: None,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), TuneError> {
        let bad = |m: String| Err(TuneError::InvalidConfig(m));
        if self.population == 0 {
            return bad("GA population must be positive".into());
        }
        if self.generations == 0 {
            return bad("GA generations must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.selection) {
            return bad(format!("GA selection {} outside [0, 1]", self.selection));
        }
        if !(0.0..=1.0).contains(&self.mutation) {
            return bad(format!("GA mutation {} outside [0, 1]", self.mutation));
        }
        Ok(())
    }
}

/// One-point crossover: genes at positions after `cut` are swapped.
pub fn crossover(a: &ParamSet, b: &ParamSet, cut: usize) -> (ParamSet, ParamSet) {
    let (mut x, mut y) = (a.clone(), b.clone());
    for i in cut + 1..a.levels().len() {
        x.levels_mut()[i] = b.levels()[i];
        y.levels_mut()[i] = a.levels()[i];
    }
    (x, y)
}

/// Produces the next generation from `population` and its `fitness`
/// (larger is better). Returns the new population and any flags raised.
///
/// Selection overwrites the `round(selection * N)` worst individuals with
/// copies of as many best ones, in place; consecutive pairs are then
/// crossed over and every gene mutates with probability `mutation`.
pub fn ga_step(
    space: &ParameterSpace,
    population: &[ParamSet],
    fitness: &[f64],
    config: &GaConfig,
    rng: &mut StudyRng,
) -> (Vec<ParamSet>, Vec<String>) {
    let n = population.len();
    let mut flags = Vec::new();
    let mut next = population.to_vec();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));
    let copies = ((config.selection * n as f64).round() as usize).min(n / 2);
    for i in 0..copies {
        next[order[n - 1 - i]] = population[order[i]].clone();
    }

    let k = space.k();
    if n < 2 {
        flags.push("population smaller than 2: crossover skipped".to_string());
    } else {
        for pair in 0..n / 2 {
            let cut = match config.fixed_cut {
                Some(c) => c.min(k - 1),
                None => rng.random_range(0..k),
            };
            let (x, y) = crossover(&next[2 * pair], &next[2 * pair + 1], cut);
            next[2 * pair] = x;
            next[2 * pair + 1] = y;
        }
    }

    for p in &mut next {
        for (gene, axis) in p.levels_mut().iter_mut().zip(space.axes()) {
            if rng.random::<f64>() < config.mutation {
                *gene = rng.random_range(0..axis.level_count());
            }
        }
    }
    (next, flags)
}

#[derive(Debug, Clone)]
pub struct Genetic {
    space: ParameterSpace,
    config: GaConfig,
    rng: StudyRng,
    population: Vec<ParamSet>,
    generation: usize,
    flags: Vec<String>,
}

impl Genetic {
    /// Starts from a uniformly random population.
    pub fn new(space: ParameterSpace, config: GaConfig, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let population = (0..config.population)
            .map(|_| {
                ParamSet::new(
                    space
                        .axes()
                        .iter()
                        .map(|a| rng.random_range(0..a.level_count()))
                        .collect(),
                )
            })
            .collect();
        Self {
            space,
            config,
            rng,
            population,
            generation: 0,
            flags: Vec::new(),
        }
    }

    pub fn population(&self) -> &[ParamSet] {
        &self.population
    }
}

impl Tuner for Genetic {
    fn propose(&mut self) -> Proposal {
        if self.generation >= self.config.generations {
            Proposal::Done
        } else {
            Proposal::Batch(self.population.clone())
        }
    }

    fn update(&mut self, scores: &[f64]) {
        self.generation += 1;
        if self.generation < self.config.generations {
            let (next, flags) = ga_step(
                &self.space,
                &self.population,
                scores,
                &self.config,
                &mut self.rng,
            );
            self.population = next;
            for f in flags {
                if !self.flags.contains(&f) {
                    self.flags.push(f);
                }
            }
        }
    }

    fn flags(&self) -> Vec<String> {
        self.flags.clone()
    }
}
