//! Experiment configs, single runs, sweeps and plots.

pub mod config;
pub mod plot;
pub mod run;
pub mod sweep;

pub use config::{ExperimentConfig, ExperimentKind, PlotScales, CONFIG_VERSION};
pub use plot::render_plots;
pub use run::{evaluate_model, execute, generate_data, read_summary, run, RunOutput, RunSummary};
pub use sweep::{sweep, SweepAxis, SweepOutcome};
