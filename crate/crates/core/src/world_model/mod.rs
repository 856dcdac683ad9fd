//! The predictive world model M and its two-part code length.
//!
//! M reads `all(t)` (observation, reward, action) and predicts `sense(t+1)`.
//! Its quality is the number of bits needed to transmit its weights plus the
//! history's residuals under its predictions. Sleep phases fit the weights by
//! gradient descent; structural changes are kept only when they shorten the
//! total code.

mod coding;
mod io;
mod structure;
mod train;

pub use coding::{CodeLengthReport, CodingScheme, WeightCoding};
pub use structure::{accept_if_shorter, Acceptance, Mutation};
pub use train::{SleepConfig, SleepOutcome};

use rand::Rng;

use crate::env::Dims;
use crate::error::{Error, Result};
use crate::history::{HistoryStore, StepRecord, TrialSpan};
use crate::nn::{make_lstm_spec_with_output, Activation, Delay, Injection, NetParams, NetSpec, Network, UnitKind, UnitSpec};

/// Topology used when a model is first built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// Fully recurrent tanh layer.
    Rnn,
    /// Cells assembled from primitive units.
    Lstm,
}

/// Full activation vector of M (one entry per unit).
pub type ModelState = Vec<f64>;

#[derive(Debug, Clone)]
pub struct WorldModel {
    net: Network,
    pub params: NetParams,
    pub coding: CodingScheme,
    dims: Dims,
    hidden: Vec<usize>,
}

/// One row of the metrics stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelMetrics {
    pub phase: usize,
    pub bits_m: f64,
    pub bits_h: f64,
    pub e: f64,
}

/// A plain tanh RNN: inputs and bias feed `h` hidden units, which recur at
/// delay 1 and feed tanh outputs.
pub fn rnn_spec(n_in: usize, h: usize, n_out: usize) -> NetSpec {
    let mut s = NetSpec::default();
    let inputs: Vec<usize> = (0..n_in).map(|_| s.add_unit(UnitSpec::input())).collect();
    let bias = s.add_unit(UnitSpec::bias());
    let hidden: Vec<usize> = (0..h).map(|_| s.add_unit(UnitSpec::hidden(Activation::Tanh))).collect();
    let outputs: Vec<usize> = (0..n_out).map(|_| s.add_unit(UnitSpec::output(Activation::Tanh))).collect();
    for &j in &hidden {
        for &i in inputs.iter().chain([&bias]) {
            s.add_learnable_link(i, j, Delay::Zero);
        }
        for &k in &hidden {
            s.add_learnable_link(k, j, Delay::One);
        }
    }
    for &o in &outputs {
        for &j in hidden.iter().chain([&bias]) {
            s.add_learnable_link(j, o, Delay::Zero);
        }
    }
    s
}

impl WorldModel {
    /// Build a fresh model with small random weights.
    pub fn new(dims: Dims, h: usize, arch: Architecture, coding: CodingScheme, rng: &mut impl Rng) -> Result<Self> {
        if h == 0 {
            return Err(Error::Config("model needs at least one hidden unit".into()));
        }
        let (n_in, n_out) = (dims.all(), dims.sense());
        let (spec, params) = match arch {
            Architecture::Rnn => {
                let spec = rnn_spec(n_in, h, n_out);
                let params = NetParams::init(&spec, rng);
                (spec, params)
            }
            Architecture::Lstm => {
                let (spec, layout) = make_lstm_spec_with_output(n_in, h, n_out, Activation::Tanh);
                let params = layout.init_params(&spec, rng);
                (spec, params)
            }
        };
        Self::from_parts(dims, spec, params, coding)
    }

    pub fn from_parts(dims: Dims, spec: NetSpec, params: NetParams, coding: CodingScheme) -> Result<Self> {
        coding.validate()?;
        if params.len() != spec.n_weights {
            return Err(Error::Dimension {
                context: "model weights",
                expected: spec.n_weights,
                got: params.len(),
            });
        }
        let (n_in, n_out) = (spec.inputs().len(), spec.outputs().len());
        if n_in != dims.all() || n_out != dims.sense() {
            return Err(Error::InvalidSpec(format!(
                "model has {n_in} inputs / {n_out} outputs, run needs {} / {}",
                dims.all(),
                dims.sense()
            )));
        }
        let hidden = spec.units_of(UnitKind::Hidden);
        if hidden.is_empty() {
            return Err(Error::InvalidSpec("model has no hidden units".into()));
        }
        let net = Network::new(spec)?;
        Ok(Self {
            net,
            params,
            coding,
            dims,
            hidden,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spec(&self) -> &NetSpec {
        self.net.spec()
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    /// Number of hidden units `h`.
    pub fn h(&self) -> usize {
        self.hidden.len()
    }

    pub fn hidden_units(&self) -> &[usize] {
        &self.hidden
    }

    pub fn weight_hash(&self) -> String {
        self.params.hash()
    }

    /// Activations at a trial start.
    pub fn zero_state(&self) -> ModelState {
        self.net.zero_state()
    }

    /// Advance one step on `all_t`; returns the new state.
    pub fn step(&self, state: &[f64], all_t: &[f64]) -> Result<ModelState> {
        self.net.forward_step(&self.params.weights, state, all_t)
    }

    pub fn step_injected(&self, state: &[f64], all_t: &[f64], injection: &Injection<'_>) -> Result<ModelState> {
        self.net.forward_step_injected(&self.params.weights, state, all_t, injection)
    }

    /// Advance one step and read the prediction of `sense(t+1)`.
    pub fn predict_step(&self, state: &[f64], all_t: &[f64]) -> Result<(ModelState, Vec<f64>)> {
        let next = self.step(state, all_t)?;
        let pred = self.pred(&next);
        Ok((next, pred))
    }

    pub fn hidden(&self, state: &[f64]) -> Vec<f64> {
        self.hidden.iter().map(|&u| state[u]).collect()
    }

    pub fn pred(&self, state: &[f64]) -> Vec<f64> {
        self.net.read_outputs(state)
    }

    fn check_episode(&self, episode: &[StepRecord]) -> Result<()> {
        if let Some(r) = episode.first() {
            let got = r.in_vec.len() + r.r_vec.len() + r.out_vec.len();
            if got != self.dims.all() {
                return Err(Error::Dimension {
                    context: "episode record",
                    expected: self.dims.all(),
                    got,
                });
            }
        }
        Ok(())
    }

    /// Predictions for every step of an episode that has a successor:
    /// `(pred(t+1), sense(t+1))` pairs, from the zero state.
    pub fn episode_predictions(&self, episode: &[StepRecord]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        self.check_episode(episode)?;
        let mut state = self.zero_state();
        let mut out = Vec::with_capacity(episode.len().saturating_sub(1));
        for pair in episode.windows(2) {
            let (next, pred) = self.predict_step(&state, &pair[0].all())?;
            state = next;
            out.push((pred, pair[1].sense()));
        }
        Ok(out)
    }

    /// Residual bits of each predicted step of an episode.
    pub fn step_bits(&self, episode: &[StepRecord]) -> Result<Vec<f64>> {
        Ok(self.step_costs(episode)?.into_iter().map(|(_, b)| b).collect())
    }

    /// `(squared error, residual bits)` of each prediction in the episode.
    pub fn step_costs(&self, episode: &[StepRecord]) -> Result<Vec<(f64, f64)>> {
        Ok(self
            .episode_predictions(episode)?
            .iter()
            .map(|(p, s)| {
                p.iter().zip(s).fold((0.0, 0.0), |(e, b), (x, y)| {
                    let d = x - y;
                    (e + d * d, b + self.coding.residual_bits(d))
                })
            })
            .collect())
    }

    /// Sum of squared prediction errors over episodes.
    pub fn prediction_error_episodes(&self, episodes: &[&[StepRecord]]) -> Result<f64> {
        let mut e = 0.0;
        for ep in episodes {
            for (p, s) in self.episode_predictions(ep)? {
                e += p.iter().zip(&s).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            }
        }
        Ok(e)
    }

    pub fn prediction_error(&self, history: &HistoryStore, spans: &[TrialSpan]) -> Result<f64> {
        self.prediction_error_episodes(&episodes(history, spans)?)
    }

    /// Two-part code length of the given episodes.
    pub fn code_length_episodes(&self, episodes: &[&[StepRecord]]) -> Result<CodeLengthReport> {
        let (mut e, mut bits_h, mut steps) = (0.0, 0.0, 0);
        for ep in episodes {
            for (p, s) in self.episode_predictions(ep)? {
                for (a, b) in p.iter().zip(&s) {
                    let d = a - b;
                    e += d * d;
                    bits_h += self.coding.residual_bits(d);
                }
                steps += 1;
            }
        }
        let bits_m = self.coding.weight_bits(&self.params.weights);
        Ok(CodeLengthReport::new(e, bits_h, bits_m, steps))
    }

    pub fn code_length(&self, history: &HistoryStore, spans: &[TrialSpan]) -> Result<CodeLengthReport> {
        self.code_length_episodes(&episodes(history, spans)?)
    }

    pub fn metrics(&self, phase: usize, report: &CodeLengthReport) -> ModelMetrics {
        ModelMetrics {
            phase,
            bits_m: report.bits_m,
            bits_h: report.bits_h,
            e: report.e,
        }
    }

    /// Same model with new weights (same spec).
    pub(crate) fn with_params(&self, params: NetParams) -> Self {
        Self {
            params,
            ..self.clone()
        }
    }
}

/// Replay the records of each span.
pub fn episodes<'a>(history: &'a HistoryStore, spans: &[TrialSpan]) -> Result<Vec<&'a [StepRecord]>> {
    spans.iter().map(|s| history.replay(s)).collect()
}
