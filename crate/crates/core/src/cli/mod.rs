//! Experiment runner behind the `metasub` binary.

pub mod commands;
pub mod config;
pub mod io;
pub mod manifest;
pub mod presets;

pub use commands::{
    cmd_simulate, cmd_test, cmd_train, meta_test, reproduce, simulate, train, CellResult,
    ReproduceReport, Simulation, TestOutput,
};
pub use config::{ExperimentConfig, MetaTestBlock, SamplerBlock, TestMode};
pub use manifest::RunManifest;
pub use presets::{grid, preset, preset_names, Scale, Scenario};
