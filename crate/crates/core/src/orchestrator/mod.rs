//! The alternating controller/sleep loop, checkpoints and metrics.

mod checkpoint;
mod config;
mod metrics;
mod run;

pub use checkpoint::{controller_text, parse_controller};
pub use config::{EvolutionConfig, RunConfig, StructureConfig};
pub use metrics::{read_csv, write_csv, MetricKind, MetricRow, CSV_HEADER};
pub use run::{ControllerState, PhaseReport, Run};

/// Run a configuration to completion.
pub fn run(cfg: crate::orchestrator::RunConfig) -> crate::Result<Run> {
    let mut r = Run::new(cfg)?;
    r.run_to_end()?;
    Ok(r)
}
