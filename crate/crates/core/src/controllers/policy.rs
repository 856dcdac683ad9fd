use crate::env::argmax;
use crate::error::{Error, Result};

/// Linear action scores over `[state, 1]`; the genome holds one row of
/// `state_len + 1` weights per action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearPolicy {
    pub n_actions: usize,
    pub state_len: usize,
}

impl LinearPolicy {
    pub fn genome_len(&self) -> usize {
        self.n_actions * (self.state_len + 1)
    }

    pub fn act(&self, genome: &[f64], state: &[f64]) -> Result<usize> {
        if genome.len() != self.genome_len() {
            return Err(Error::Dimension {
                context: "policy genome",
                expected: self.genome_len(),
                got: genome.len(),
            });
        }
        if state.len() != self.state_len {
            return Err(Error::Dimension {
                context: "policy state",
                expected: self.state_len,
                got: state.len(),
            });
        }
        let scores: Vec<f64> = genome
            .chunks(self.state_len + 1)
            .map(|row| row[..self.state_len].iter().zip(state).map(|(w, x)| w * x).sum::<f64>() + row[self.state_len])
            .collect();
        Ok(argmax(&scores))
    }

    /// Re-index a genome after the state layout changed (see
    /// [`remap_features`](super::remap_features)).
    pub fn remap(&self, genome: &[f64], map: &[Option<usize>]) -> (LinearPolicy, Vec<f64>) {
        let next = LinearPolicy {
            n_actions: self.n_actions,
            state_len: map.len(),
        };
        let mut out = Vec::with_capacity(next.genome_len());
        for row in genome.chunks(self.state_len + 1) {
            out.extend(map.iter().map(|m| m.map_or(0.0, |i| row[i])));
            out.push(row[self.state_len]);
        }
        (next, out)
    }
}
