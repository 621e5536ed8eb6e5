//! Experiment runner: configuration, built-in layouts, seeded sweeps and
//! result emission.

mod config;
mod layout;
mod output;
mod run;

pub use config::{
    load_config, parse_config, AnchorLayout, ConformationSource, ExperimentConfig, MotionSettings,
    PlacementSettings, Scenario,
};
pub use layout::{box_vehicle, box_vehicle_size, BOX_HEIGHT, BOX_LENGTH, BOX_WIDTH};
pub use output::{emit_results, OutputFormat, PlotPoint, ResultRow, ResultTable};
pub use run::{run_experiment, run_experiment_with_threads, threads_from_env, THREADS_ENV};
