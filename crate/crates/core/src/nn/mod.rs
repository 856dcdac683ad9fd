//! Explicit-graph recurrent networks.
//!
//! A [`NetSpec`] lists units and directed weighted links. Links carry a delay
//! of 0 (within-step, must be acyclic) or 1 (reads the previous step). Units
//! sum or multiply their weighted inputs before applying an activation
//! function. [`Network`] compiles a spec once and then runs forward steps and
//! backpropagation through time.

mod lstm;
mod network;
mod params;
mod spec;
mod text;

pub use lstm::{make_lstm_spec, make_lstm_spec_with_output, LstmLayout};
pub use network::{ActivationTrace, Injection, Network, SquaredError, StepLoss};
pub use params::{sgd_step, NetParams};
pub use spec::{Activation, Combine, Delay, LinkSpec, NetSpec, UnitKind, UnitSpec, WeightRef};
pub use text::{read_net, read_net_from, write_net};
