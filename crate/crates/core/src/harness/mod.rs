//! Simulation harness: world construction, episode runners, tuning,
//! training, evaluation and metrics output.

pub mod checks;
pub mod config;
pub mod csv_io;
pub mod episode;
pub mod experiment;
pub mod trace;
pub mod world;

pub use config::{PolicyKind, SimConfig};
pub use episode::{EpisodeMetrics, HandoverEnv, Refresh, RunSettings, Tracker};
pub use experiment::{run_experiment, ExperimentOutcome, PolicyRun, PolicySummary, TrainedPolicy};
pub use world::{Episode, World};
