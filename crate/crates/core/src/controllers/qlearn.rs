use crate::env::argmax;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
}

impl Default for QConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            alpha: 0.05,
            epsilon_start: 0.3,
            epsilon_end: 0.02,
        }
    }
}

impl QConfig {
    /// Linear decay from `epsilon_start` to `epsilon_end` as `progress`
    /// goes from 0 to 1.
    pub fn epsilon(&self, progress: f64) -> f64 {
        let p = progress.clamp(0.0, 1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * p
    }
}

/// Action values linear in `[state, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    /// One row per action, `state_len + 1` columns (bias last).
    pub weights: Vec<Vec<f64>>,
    pub gamma: f64,
    pub alpha: f64,
}

impl QFunction {
    pub fn new(n_actions: usize, state_len: usize, gamma: f64, alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Config(format!("discount {gamma} must be in [0, 1)")));
        }
        if n_actions == 0 {
            return Err(Error::Config("Q-function needs at least one action".into()));
        }
        Ok(Self {
            weights: vec![vec![0.0; state_len + 1]; n_actions],
            gamma,
            alpha,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.weights.len()
    }

    pub fn state_len(&self) -> usize {
        self.weights[0].len() - 1
    }

    fn check(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.state_len() {
            return Err(Error::Dimension {
                context: "Q-function state",
                expected: self.state_len(),
                got: s.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, s: &[f64], a: usize) -> f64 {
        let row = &self.weights[a];
        row[..s.len()].iter().zip(s).map(|(w, x)| w * x).sum::<f64>() + row[s.len()]
    }

    pub fn values(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.check(s)?;
        Ok((0..self.n_actions()).map(|a| self.value(s, a)).collect())
    }

    /// Greedy action, lowest index on ties.
    pub fn greedy(&self, s: &[f64]) -> Result<usize> {
        Ok(argmax(&self.values(s)?))
    }

    /// One Q-learning update. `next = None` marks a terminal transition.
    pub fn q_step(&mut self, s: &[f64], a: usize, r: f64, next: Option<&[f64]>) -> Result<()> {
        self.check(s)?;
        if a >= self.n_actions() {
            return Err(Error::Contract(format!("action {a} out of range")));
        }
        let target = match next {
            Some(s2) => {
                let v = self.values(s2)?;
                r + self.gamma * v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
            None => r,
        };
        let delta = target - self.value(s, a);
        let step = self.alpha * delta;
        let row = &mut self.weights[a];
        for (w, x) in row.iter_mut().zip(s) {
            *w += step * x;
        }
        let bias = s.len();
        row[bias] += step;
        if row.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("Q weights".into()));
        }
        Ok(())
    }

    /// Re-index the state features; `map[i]` names the old feature that new
    /// feature `i` inherits (new features start at zero).
    pub fn remap(&self, map: &[Option<usize>]) -> Self {
        let weights = self
            .weights
            .iter()
            .map(|row| {
                let bias = row[row.len() - 1];
                let mut v: Vec<f64> = map.iter().map(|m| m.map_or(0.0, |i| row[i])).collect();
                v.push(bias);
                v
            })
            .collect();
        Self {
            weights,
            ..self.clone()
        }
    }
}
