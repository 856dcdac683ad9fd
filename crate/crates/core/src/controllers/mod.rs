//! Controllers that exploit the world model.
//!
//! * C1: linear Q-learning on the Markov state `(sense, hidden, pred)`.
//! * C2: an evolved linear policy on the same state.
//! * C3: an evolved recurrent controller coupled to a frozen M through
//!   learnable read/write links and an input gate.

mod cm;
mod es;
mod markov;
mod policy;
mod qlearn;
mod runner;

pub use cm::{cm_forward, freeze_and_grow, think_steps, CmConfig, CmSpec, CmState, CmStep, InterfaceLink};
pub use es::{evolve, EsConfig, Evaluator, EvolutionStrategy, GenerationStats, Genome};
pub use markov::{markov_len, markov_state, remap_features, MarkovState};
pub use policy::LinearPolicy;
pub use qlearn::{QConfig, QFunction};
pub use runner::{
    learn_trial, run_trial, Agent, CmAgent, PolicyAgent, QAgent, RandomAgent, StateMode, StateTracker, TrialRun,
    Transition,
};

/// Which controller a run trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    C1,
    C2,
    C3,
}
