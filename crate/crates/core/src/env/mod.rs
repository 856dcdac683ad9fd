//! Seeded test environments with brute-force-solvable optima.
//!
//! Observations are real vectors in [-1, 1]; rewards arrive on separate
//! channels; actions are one-hot vectors decoded by argmax (lowest index wins
//! ties). Every trial is fully determined by the environment seed, the trial
//! seed, and the action sequence.

mod grid;
mod oracle_mdp;
mod recall;
mod tmaze;
mod toggle;
mod two_room;

use std::collections::BTreeMap;

pub use grid::Goal;
pub use oracle_mdp::{ORACLE_MDP_START, ORACLE_MDP_TABLE};
pub use two_room::Room;

use crate::error::{Error, Result};
use crate::rng::{stream, StreamRng};

/// Channel sizes: observation `m`, reward `n`, action `o`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
    pub o: usize,
}

impl Dims {
    pub fn sense(&self) -> usize {
        self.m + self.n
    }

    pub fn all(&self) -> usize {
        self.m + self.n + self.o
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: String,
    pub max_steps: usize,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
}

impl EnvSpec {
    fn with(name: &str, max_steps: usize, params: &[(&str, f64)]) -> Self {
        Self {
            name: name.to_string(),
            max_steps,
            seed: 0,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    pub fn tmaze(corridor_length: usize) -> Self {
        Self::with(
            "tmaze",
            2 * corridor_length + 2,
            &[("corridor_length", corridor_length as f64)],
        )
    }

    pub fn delayed_recall(delay: usize) -> Self {
        Self::with("recall", delay + 1, &[("delay", delay as f64)])
    }

    pub fn toggle(length: usize) -> Self {
        Self::with("toggle", length, &[])
    }

    pub fn two_room() -> Self {
        Self::with("two_room", 12, &[("period", 4.0), ("step_cost", 0.01)])
    }

    pub fn oracle_mdp() -> Self {
        Self::with("oracle_mdp", 10, &[("gamma", 0.9)])
    }

    pub fn gridworld(goal: Goal) -> Self {
        let g = match goal {
            Goal::A => 0.0,
            Goal::B => 1.0,
        };
        Self::with("grid", 8, &[("goal", g)])
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    fn count_param(&self, key: &str, default: usize) -> Result<usize> {
        match self.param(key) {
            None => Ok(default),
            Some(v) if v >= 0.0 && v.fract() == 0.0 => Ok(v as usize),
            Some(v) => Err(Error::Config(format!("env.{key} = {v} is not a count"))),
        }
    }

    pub fn dims(&self) -> Result<Dims> {
        Ok(Env::new(self)?.dims())
    }

    /// Per-step discount used by [`optimal_return`]; 1 unless configured.
    pub fn discount(&self) -> f64 {
        self.param("gamma").unwrap_or(1.0)
    }
}

/// What the agent perceives after reset or a step.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub in_vec: Vec<f64>,
    pub r_vec: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    /// The trial is over (terminal event or step cap).
    pub done: bool,
    /// Ended by a terminal event rather than the step cap.
    pub terminated: bool,
}

#[derive(Debug, Clone)]
enum Kind {
    TMaze(tmaze::TMaze),
    Recall(recall::DelayedRecall),
    Toggle(toggle::Toggle),
    TwoRoom(two_room::TwoRoom),
    Oracle(oracle_mdp::OracleMdp),
    Grid(grid::Grid),
}

/// A running environment instance: latent state, step counter, done flag.
#[derive(Debug, Clone)]
pub struct Env {
    spec: EnvSpec,
    kind: Kind,
    dims: Dims,
    steps: usize,
    done: bool,
    trial_rng: StreamRng,
}

impl Env {
    pub fn new(spec: &EnvSpec) -> Result<Self> {
        if spec.max_steps == 0 {
            return Err(Error::Config("env.max_steps must be >= 1".into()));
        }
        let kind = match spec.name.as_str() {
            "tmaze" => {
                let len = spec.count_param("corridor_length", 3)?;
                if len == 0 {
                    return Err(Error::Config("corridor_length must be >= 1".into()));
                }
                Kind::TMaze(tmaze::TMaze::new(len, spec.max_steps))
            }
            "recall" => Kind::Recall(recall::DelayedRecall::new(spec.count_param("delay", 5)?)),
            "toggle" => Kind::Toggle(toggle::Toggle::new(spec.max_steps)),
            "two_room" => {
                let period = spec.count_param("period", 4)?.max(1);
                let cost = spec.param("step_cost").unwrap_or(0.01);
                Kind::TwoRoom(two_room::TwoRoom::new(spec.seed, period, cost))
            }
            "oracle_mdp" => Kind::Oracle(oracle_mdp::OracleMdp::new()),
            "grid" => {
                let goal = match spec.count_param("goal", 0)? {
                    0 => Goal::A,
                    1 => Goal::B,
                    g => return Err(Error::Config(format!("env.goal = {g}"))),
                };
                Kind::Grid(grid::Grid::new(goal))
            }
            other => return Err(Error::Config(format!("unknown environment {other:?}"))),
        };
        let dims = match &kind {
            Kind::TMaze(_) => tmaze::DIMS,
            Kind::Recall(_) => recall::DIMS,
            Kind::Toggle(_) => toggle::DIMS,
            Kind::TwoRoom(_) => two_room::DIMS,
            Kind::Oracle(_) => oracle_mdp::DIMS,
            Kind::Grid(_) => grid::DIMS,
        };
        Ok(Self {
            spec: spec.clone(),
            kind,
            dims,
            steps: 0,
            done: true,
            trial_rng: stream(spec.seed, "env-trial", &[0]),
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Start a trial. Deterministic given `(spec.seed, trial_seed)`.
    pub fn reset(&mut self, trial_seed: u64) -> Observation {
        self.trial_rng = stream(self.spec.seed, "env-trial", &[trial_seed]);
        let latent = match &self.kind {
            Kind::TMaze(_) | Kind::Recall(_) | Kind::Toggle(_) => {
                rand::Rng::random_range(&mut self.trial_rng, 0..2u64)
            }
            _ => 0,
        };
        self.reset_latent(latent)
    }

    /// Start a trial from an explicit latent start (e.g. the cue).
    fn reset_latent(&mut self, latent: u64) -> Observation {
        self.steps = 0;
        self.done = false;
        let in_vec = match &mut self.kind {
            Kind::TMaze(e) => e.reset(latent),
            Kind::Recall(e) => e.reset(latent),
            Kind::Toggle(e) => e.reset(latent),
            Kind::TwoRoom(e) => e.reset(),
            Kind::Oracle(e) => e.reset(),
            Kind::Grid(e) => e.reset(),
        };
        Observation {
            in_vec,
            r_vec: vec![0.0; self.dims.n],
        }
    }

    /// Latent starts and their probabilities under [`reset`](Self::reset).
    fn latent_starts(&self) -> Vec<(u64, f64)> {
        match &self.kind {
            Kind::TMaze(_) | Kind::Recall(_) | Kind::Toggle(_) => vec![(0, 0.5), (1, 0.5)],
            _ => vec![(0, 1.0)],
        }
    }

    /// Apply a one-hot action vector (decoded by argmax).
    pub fn step(&mut self, out_vec: &[f64]) -> Result<Transition> {
        if out_vec.len() != self.dims.o {
            return Err(Error::Dimension {
                context: "action vector",
                expected: self.dims.o,
                got: out_vec.len(),
            });
        }
        self.step_action(argmax(out_vec))
    }

    pub fn step_action(&mut self, action: usize) -> Result<Transition> {
        if self.done {
            return Err(Error::Environment("step after done; reset first".into()));
        }
        if action >= self.dims.o {
            return Err(Error::Environment(format!("action {action} out of range")));
        }
        self.steps += 1;
        let (in_vec, reward, terminated) = match &mut self.kind {
            Kind::TMaze(e) => e.step(action),
            Kind::Recall(e) => e.step(action),
            Kind::Toggle(e) => e.step(action),
            Kind::TwoRoom(e) => e.step(action, &mut self.trial_rng),
            Kind::Oracle(e) => e.step(action),
            Kind::Grid(e) => e.step(action),
        };
        let done = terminated || self.steps >= self.spec.max_steps;
        self.done = done;
        Ok(Transition {
            obs: Observation {
                in_vec,
                r_vec: vec![reward],
            },
            done,
            terminated,
        })
    }

    /// Current room, for the two-room environment.
    pub fn room(&self) -> Option<Room> {
        match &self.kind {
            Kind::TwoRoom(e) => Some(e.room()),
            _ => None,
        }
    }

    /// The fixed observation sequence shown in the regular room.
    pub fn regular_pattern(&self) -> Option<&[[f64; 3]]> {
        match &self.kind {
            Kind::TwoRoom(e) => Some(e.pattern()),
            _ => None,
        }
    }
}

/// Index of the largest component; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn one_hot(index: usize, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[index] = 1.0;
    v
}

/// Maximum expected external return, by exhaustive search over action
/// sequences up to `max_steps` for every latent start.
pub fn optimal_return(spec: &EnvSpec) -> Result<f64> {
    let env = Env::new(spec)?;
    let (o, depth) = (env.dims.o, spec.max_steps);
    if (o as f64).powi(depth as i32) > 2e7 {
        return Err(Error::Config(format!(
            "search space {o}^{depth} too large for exhaustive search"
        )));
    }
    let gamma = spec.discount();
    fn best(env: &Env, gamma: f64) -> Result<f64> {
        let mut top = f64::NEG_INFINITY;
        for a in 0..env.dims.o {
            let mut next = env.clone();
            let tr = next.step_action(a)?;
            let r: f64 = tr.obs.r_vec.iter().sum();
            let tail = if tr.done { 0.0 } else { gamma * best(&next, gamma)? };
            top = top.max(r + tail);
        }
        Ok(top)
    }
    let mut expected = 0.0;
    for (latent, p) in env.latent_starts() {
        let mut e = env.clone();
        e.reset_latent(latent);
        expected += p * best(&e, gamma)?;
    }
    Ok(expected)
}
