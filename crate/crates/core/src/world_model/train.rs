use super::{episodes, CodeLengthReport, WorldModel};
use crate::error::{Error, Result};
use crate::history::{HistoryStore, StepRecord, TrialSpan};
use crate::nn::{sgd_step, SquaredError};

/// Weight-training budget of one sleep phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SleepConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Coefficient of the `sum w^2` regularizer.
    pub l2: f64,
    /// Gradient norm ceiling per update.
    pub clip: f64,
}

impl Default for SleepConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.05,
            l2: 1e-4,
            clip: 5.0,
        }
    }
}

type Prepared = (Vec<Vec<f64>>, Vec<Option<Vec<f64>>>);

#[derive(Debug, Clone)]
pub struct SleepOutcome {
    pub model: WorldModel,
    pub before: CodeLengthReport,
    pub after: CodeLengthReport,
    /// Training hit a non-finite loss; `model` is the last finite one.
    pub diverged: bool,
}

impl WorldModel {
    /// Gradient descent on `E + l2 * sum w^2`, one update per
    /// episode per epoch, with the state reset to zeros at each episode.
    pub fn sleep_train_episodes(&self, eps: &[&[StepRecord]], cfg: &SleepConfig) -> Result<SleepOutcome> {
        let before = self.code_length_episodes(eps)?;
        let prepared: Vec<Prepared> = eps
            .iter()
            .filter(|ep| ep.len() >= 2)
            .map(|ep| {
                let inputs = ep[..ep.len() - 1].iter().map(StepRecord::all).collect();
                let targets = ep[1..].iter().map(|r| Some(r.sense())).collect();
                (inputs, targets)
            })
            .collect();
        let (mut model, mut diverged) = self.descend(&prepared, cfg)?;
        let after = match model.code_length_episodes(eps) {
            Ok(r) if r.total.is_finite() => r,
            Ok(_) | Err(Error::NumericOverflow { .. }) => {
                // The last update produced a model that cannot be scored.
                diverged = true;
                model = self.clone();
                before
            }
            Err(e) => return Err(e),
        };
        Ok(SleepOutcome {
            model,
            before,
            after,
            diverged,
        })
    }

    /// Train on one episode using only the predictions flagged in `fit`
    /// (`fit[i]` covers the prediction of record `i + 1`). Returns the
    /// unchanged model if training diverges.
    pub fn fit_steps(&self, episode: &[StepRecord], fit: &[bool], cfg: &SleepConfig) -> Result<WorldModel> {
        if episode.len() < 2 {
            return Ok(self.clone());
        }
        if fit.len() != episode.len() - 1 {
            return Err(Error::Dimension {
                context: "fit mask",
                expected: episode.len() - 1,
                got: fit.len(),
            });
        }
        let inputs = episode[..episode.len() - 1].iter().map(StepRecord::all).collect();
        let targets = episode[1..]
            .iter()
            .zip(fit)
            .map(|(r, &f)| f.then(|| r.sense()))
            .collect();
        let (model, diverged) = self.descend(&[(inputs, targets)], cfg)?;
        Ok(if diverged { self.clone() } else { model })
    }

    /// Clipped per-episode gradient descent; the flag reports divergence,
    /// in which case the model is the last finite one.
    fn descend(&self, prepared: &[Prepared], cfg: &SleepConfig) -> Result<(WorldModel, bool)> {
        let mut model = self.clone();
        let mut diverged = false;
        'outer: for _ in 0..cfg.epochs {
            for (inputs, targets) in prepared {
                let w = &model.params.weights;
                let loss = SquaredError { targets };
                let (e, mut grad) = match model.network().bptt_gradient(w, inputs, &loss) {
                    Ok(v) => v,
                    Err(Error::NumericOverflow { .. }) => {
                        diverged = true;
                        break 'outer;
                    }
                    Err(e) => return Err(e),
                };
                for (g, wi) in grad.iter_mut().zip(w) {
                    *g += 2.0 * cfg.l2 * wi;
                }
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if !e.is_finite() || !norm.is_finite() {
                    diverged = true;
                    break 'outer;
                }
                if norm > cfg.clip {
                    grad.iter_mut().for_each(|g| *g *= cfg.clip / norm);
                }
                match sgd_step(&model.params, &grad, cfg.lr) {
                    Ok(p) => model = model.with_params(p),
                    Err(Error::NonFinite(_)) => {
                        diverged = true;
                        break 'outer;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Ok((model, diverged))
    }

    pub fn sleep_train(&self, history: &HistoryStore, spans: &[TrialSpan], cfg: &SleepConfig) -> Result<SleepOutcome> {
        if spans.is_empty() {
            return Err(Error::EmptyHistory);
        }
        self.sleep_train_episodes(&episodes(history, spans)?, cfg)
    }
}
