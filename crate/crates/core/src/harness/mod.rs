//! Scenario simulation, the Monte-Carlo experiment driver and file outputs.

mod config;
mod experiment;
mod output;
mod scenario;

pub use config::{
    load_config, BirthComponentConfig, BirthConfig, FilterKind, InitTrackConfig, MotionConfig,
    ScenarioConfig, SensorConfig, TrajectoryConfig, Waypoint,
};
pub use experiment::{
    run_experiment, simulate_truth_and_frames, ExperimentResult, RunResult, StepRecord,
};
pub use output::{write_outputs, write_simulation};
pub use scenario::{generate_truth, simulate_frames, GroundTruth};
