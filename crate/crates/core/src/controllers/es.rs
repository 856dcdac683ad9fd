use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// A flat weight vector and, once evaluated, its fitness.
#[derive(Debug, Clone, PartialEq)]
pub struct Genome {
    pub weights: Vec<f64>,
    pub fitness: Option<f64>,
}

impl Genome {
    pub fn new(weights: Vec<f64>) -> Self {
        Self {
            weights,
            fitness: None,
        }
    }

    pub fn random(len: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, scale).expect("positive scale");
        Self::new((0..len).map(|_| normal.sample(rng)).collect())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn score(&self) -> f64 {
        self.fitness.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsConfig {
    pub mu: usize,
    pub lambda: usize,
    pub sigma: f64,
    pub generations: usize,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            mu: 5,
            lambda: 20,
            sigma: 0.1,
            generations: 10,
        }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mu == 0 || self.lambda < self.mu {
            return Err(Error::Config(format!(
                "evolution needs mu >= 1 and lambda >= mu (mu = {}, lambda = {})",
                self.mu, self.lambda
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config("mutation sigma must be positive".into()));
        }
        Ok(())
    }
}

/// Summary of one generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub sigma: f64,
}

/// Fitness callback: `(weights, generation) -> fitness`. An `Err` counts as
/// a failed evaluation (fitness `-inf`).
pub type Evaluator<'a> = dyn FnMut(&[f64], usize) -> Result<f64> + 'a;

/// Elitist `(mu + lambda)` evolution strategy with Gaussian mutation and the
/// 1/5 success rule.
///
/// Parents are re-evaluated every generation together with their offspring,
/// so a lucky evaluation of a noisy fitness does not survive forever; the
/// best genome ever evaluated is tracked separately.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionStrategy {
    pub cfg: EsConfig,
    pub parents: Vec<Genome>,
    pub sigma: f64,
    pub best: Option<Genome>,
    pub generation: usize,
}

const ADAPT: f64 = 0.85;

impl EvolutionStrategy {
    pub fn new(cfg: EsConfig, population: Vec<Genome>) -> Result<Self> {
        cfg.validate()?;
        if population.is_empty() {
            return Err(Error::Config("initial population is empty".into()));
        }
        let len = population[0].len();
        if population.iter().any(|g| g.len() != len) {
            return Err(Error::Contract("genomes of different lengths".into()));
        }
        let best = population
            .iter()
            .filter(|g| g.fitness.is_some())
            .max_by(|a, b| a.score().total_cmp(&b.score()))
            .cloned();
        Ok(Self {
            sigma: cfg.sigma,
            cfg,
            parents: population,
            best,
            generation: 0,
        })
    }

    fn note_best(&mut self, g: &Genome) {
        let better = match &self.best {
            None => true,
            Some(b) => g.score() > b.score(),
        };
        if better {
            self.best = Some(g.clone());
        }
    }

    /// Evaluate the current parents (used before the first generation).
    pub fn evaluate_parents(&mut self, evaluate: &mut Evaluator<'_>) {
        let generation = self.generation;
        for i in 0..self.parents.len() {
            let f = evaluate(&self.parents[i].weights, generation).unwrap_or(f64::NEG_INFINITY);
            self.parents[i].fitness = Some(f);
            let g = self.parents[i].clone();
            self.note_best(&g);
        }
    }

    /// Run one generation: re-evaluate parents, breed `lambda` offspring,
    /// keep the best `mu` (parents win ties).
    pub fn step(&mut self, evaluate: &mut Evaluator<'_>, rng: &mut impl Rng) -> GenerationStats {
        self.evaluate_parents(evaluate);
        let generation = self.generation;
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut offspring = Vec::with_capacity(self.cfg.lambda);
        let mut successes = 0;
        for _ in 0..self.cfg.lambda {
            let p = rng.random_range(0..self.parents.len());
            let parent = &self.parents[p];
            let weights: Vec<f64> = parent
                .weights
                .iter()
                .map(|w| w + self.sigma * normal.sample(rng))
                .collect();
            let f = evaluate(&weights, generation).unwrap_or(f64::NEG_INFINITY);
            // Ties count: on a fitness plateau the step size grows until
            // some offspring behaves differently instead of collapsing.
            if f >= parent.score() && f.is_finite() {
                successes += 1;
            }
            let child = Genome {
                weights,
                fitness: Some(f),
            };
            self.note_best(&child);
            offspring.push(child);
        }
        let rate = successes as f64 / self.cfg.lambda as f64;
        if rate > 0.2 {
            self.sigma /= ADAPT;
        } else if rate < 0.2 {
            self.sigma *= ADAPT;
        }
        let mut pool: Vec<Genome> = std::mem::take(&mut self.parents);
        pool.extend(offspring);
        let mean = pool.iter().map(Genome::score).filter(|f| f.is_finite()).sum::<f64>()
            / pool.iter().filter(|g| g.score().is_finite()).count().max(1) as f64;
        // Stable sort: parents precede offspring with equal fitness.
        pool.sort_by(|a, b| b.score().total_cmp(&a.score()));
        pool.retain(|g| g.score() > f64::NEG_INFINITY);
        if pool.is_empty() {
            // Every evaluation failed; keep searching from the best known.
            pool.push(self.best.clone().expect("something was evaluated"));
        }
        pool.truncate(self.cfg.mu);
        self.parents = pool;
        self.generation += 1;
        GenerationStats {
            generation,
            best_fitness: self.best.as_ref().map_or(f64::NEG_INFINITY, Genome::score),
            mean_fitness: mean,
            sigma: self.sigma,
        }
    }
}

/// Run `cfg.generations` generations from `population` and return the best
/// genome ever evaluated with per-generation statistics.
pub fn evolve(
    population: Vec<Genome>,
    evaluate: &mut Evaluator<'_>,
    cfg: &EsConfig,
    rng: &mut impl Rng,
) -> Result<(Genome, Vec<GenerationStats>)> {
    let mut es = EvolutionStrategy::new(*cfg, population)?;
    let mut stats = Vec::with_capacity(cfg.generations);
    if cfg.generations == 0 {
        es.evaluate_parents(evaluate);
    }
    for _ in 0..cfg.generations {
        stats.push(es.step(evaluate, rng));
    }
    let best = es.best.expect("population was evaluated");
    Ok((best, stats))
}
