use rand::Rng;

use super::{cm_forward, markov_state, think_steps, CmSpec, CmState, LinearPolicy, QFunction};
use crate::env::{one_hot, Env, Observation, Room};
use crate::error::Result;
use crate::history::StepRecord;
use crate::world_model::{ModelState, WorldModel};

/// What a flat learner sees as its state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateMode {
    /// The observation vector only.
    Observation,
    /// Observation and reward channels.
    Sense,
    /// Sense, M's hidden activations and M's prediction.
    Markov,
}

/// A controller driving one trial.
pub trait Agent {
    /// Called after reset with the first observation.
    fn begin(&mut self) -> Result<()>;
    /// Choose the action for the current observation.
    fn act(&mut self, obs: &Observation, rng: &mut dyn rand::RngCore) -> Result<usize>;
    /// Called with the final observation.
    fn finish(&mut self, _obs: &Observation, _terminated: bool) -> Result<()> {
        Ok(())
    }
}

/// A completed trial, numbered from `t = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRun {
    pub records: Vec<StepRecord>,
    pub external_return: f64,
    /// Location for each record (two-room environment only).
    pub rooms: Vec<Option<Room>>,
    pub terminated: bool,
}

impl TrialRun {
    /// Number of actions taken.
    pub fn actions(&self) -> usize {
        self.records.len() - 1
    }
}

/// Play one trial. The last record holds the final observation with a zero
/// action vector.
pub fn run_trial(env: &mut Env, trial_seed: u64, agent: &mut dyn Agent, rng: &mut dyn rand::RngCore) -> Result<TrialRun> {
    let o = env.dims().o;
    let mut obs = env.reset(trial_seed);
    agent.begin()?;
    let mut records = Vec::new();
    let mut rooms = vec![env.room()];
    let mut external_return = 0.0;
    loop {
        let a = agent.act(&obs, rng)?;
        records.push(StepRecord {
            t: records.len() as u64 + 1,
            in_vec: obs.in_vec.clone(),
            r_vec: obs.r_vec.clone(),
            out_vec: one_hot(a, o),
            intrinsic: 0.0,
        });
        let tr = env.step_action(a)?;
        rooms.push(env.room());
        external_return += tr.obs.r_vec.iter().sum::<f64>();
        obs = tr.obs;
        if tr.done {
            agent.finish(&obs, tr.terminated)?;
            records.push(StepRecord {
                t: records.len() as u64 + 1,
                in_vec: obs.in_vec.clone(),
                r_vec: obs.r_vec.clone(),
                out_vec: vec![0.0; o],
                intrinsic: 0.0,
            });
            return Ok(TrialRun {
                records,
                external_return,
                rooms,
                terminated: tr.terminated,
            });
        }
    }
}

fn sense_of(obs: &Observation) -> Vec<f64> {
    let mut v = obs.in_vec.clone();
    v.extend_from_slice(&obs.r_vec);
    v
}

/// Tracks M alongside a flat controller and produces its state vectors.
#[derive(Debug, Clone)]
pub struct StateTracker<'a> {
    pub mode: StateMode,
    pub model: &'a WorldModel,
    m_state: ModelState,
}

impl<'a> StateTracker<'a> {
    pub fn new(mode: StateMode, model: &'a WorldModel) -> Self {
        Self {
            mode,
            model,
            m_state: model.zero_state(),
        }
    }

    pub fn state_len(&self) -> usize {
        let d = self.model.dims();
        match self.mode {
            StateMode::Observation => d.m,
            StateMode::Sense => d.sense(),
            StateMode::Markov => 2 * d.sense() + self.model.h(),
        }
    }

    pub fn reset(&mut self) {
        self.m_state = self.model.zero_state();
    }

    pub fn state(&self, obs: &Observation) -> Result<Vec<f64>> {
        Ok(match self.mode {
            StateMode::Observation => obs.in_vec.clone(),
            StateMode::Sense => sense_of(obs),
            StateMode::Markov => markov_state(self.model, &sense_of(obs), &self.m_state)?.0,
        })
    }

    /// Feed `all(t)` to M.
    pub fn advance(&mut self, obs: &Observation, action: usize) -> Result<()> {
        if self.mode == StateMode::Markov {
            let mut all_t = sense_of(obs);
            all_t.extend(one_hot(action, self.model.dims().o));
            self.m_state = self.model.step(&self.m_state, &all_t)?;
        }
        Ok(())
    }
}

/// One stored Q-learning transition; `next = None` marks termination.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next: Option<Vec<f64>>,
}

/// Epsilon-greedy linear Q controller (C1). Transitions are buffered and
/// learned from at the end of the trial, once the trial's intrinsic reward
/// is known.
pub struct QAgent<'a> {
    pub q: &'a QFunction,
    pub tracker: StateTracker<'a>,
    pub epsilon: f64,
    pub transitions: Vec<Transition>,
    pending: Option<(Vec<f64>, usize)>,
}

impl<'a> QAgent<'a> {
    pub fn new(q: &'a QFunction, tracker: StateTracker<'a>, epsilon: f64) -> Self {
        Self {
            q,
            tracker,
            epsilon,
            transitions: Vec::new(),
            pending: None,
        }
    }
}

impl Agent for QAgent<'_> {
    fn begin(&mut self) -> Result<()> {
        self.tracker.reset();
        self.transitions.clear();
        self.pending = None;
        Ok(())
    }

    fn act(&mut self, obs: &Observation, rng: &mut dyn rand::RngCore) -> Result<usize> {
        let s = self.tracker.state(obs)?;
        if let Some((ps, pa)) = self.pending.take() {
            self.transitions.push(Transition {
                state: ps,
                action: pa,
                reward: obs.r_vec.iter().sum(),
                next: Some(s.clone()),
            });
        }
        let a = if rng.random::<f64>() < self.epsilon {
            rng.random_range(0..self.q.n_actions())
        } else {
            self.q.greedy(&s)?
        };
        self.tracker.advance(obs, a)?;
        self.pending = Some((s, a));
        Ok(a)
    }

    fn finish(&mut self, obs: &Observation, terminated: bool) -> Result<()> {
        if let Some((ps, pa)) = self.pending.take() {
            let next = if terminated { None } else { Some(self.tracker.state(obs)?) };
            self.transitions.push(Transition {
                state: ps,
                action: pa,
                reward: obs.r_vec.iter().sum(),
                next,
            });
        }
        Ok(())
    }
}

/// Apply a trial's transitions in order; `bonus` is added to the last
/// transition's reward.
pub fn learn_trial(q: &mut QFunction, transitions: &[Transition], bonus: f64) -> Result<()> {
    let last = transitions.len().saturating_sub(1);
    for (i, tr) in transitions.iter().enumerate() {
        let r = if i == last { tr.reward + bonus } else { tr.reward };
        q.q_step(&tr.state, tr.action, r, tr.next.as_deref())?;
    }
    Ok(())
}

/// Greedy linear policy on a state vector (C2).
pub struct PolicyAgent<'a> {
    pub policy: LinearPolicy,
    pub genome: &'a [f64],
    pub tracker: StateTracker<'a>,
}

impl Agent for PolicyAgent<'_> {
    fn begin(&mut self) -> Result<()> {
        self.tracker.reset();
        Ok(())
    }

    fn act(&mut self, obs: &Observation, _rng: &mut dyn rand::RngCore) -> Result<usize> {
        let s = self.tracker.state(obs)?;
        let a = self.policy.act(self.genome, &s)?;
        self.tracker.advance(obs, a)?;
        Ok(a)
    }
}

/// The coupled controller (C3), optionally thinking before each action.
pub struct CmAgent<'a> {
    pub cm: &'a CmSpec,
    pub genome: &'a [f64],
    pub model: &'a WorldModel,
    pub think_k: usize,
    pub force_gate: Option<f64>,
    state: CmState,
}

impl<'a> CmAgent<'a> {
    pub fn new(cm: &'a CmSpec, genome: &'a [f64], model: &'a WorldModel, think_k: usize) -> Self {
        Self {
            cm,
            genome,
            model,
            think_k,
            force_gate: None,
            state: cm.zero_state(model),
        }
    }

    pub fn state(&self) -> &CmState {
        &self.state
    }
}

impl Agent for CmAgent<'_> {
    fn begin(&mut self) -> Result<()> {
        self.state = self.cm.zero_state(self.model);
        Ok(())
    }

    fn act(&mut self, obs: &Observation, _rng: &mut dyn rand::RngCore) -> Result<usize> {
        let sense = sense_of(obs);
        if self.think_k > 0 {
            self.state = think_steps(self.cm, self.genome, self.model, self.think_k, &self.state, &sense, self.force_gate)?;
        }
        let step = cm_forward(self.cm, self.genome, self.model, &self.state, &sense, self.force_gate)?;
        self.state = step.state;
        Ok(step.action)
    }
}

/// Uniformly random actions.
pub struct RandomAgent {
    pub n_actions: usize,
}

impl Agent for RandomAgent {
    fn begin(&mut self) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, _obs: &Observation, rng: &mut dyn rand::RngCore) -> Result<usize> {
        Ok(rng.random_range(0..self.n_actions))
    }
}
