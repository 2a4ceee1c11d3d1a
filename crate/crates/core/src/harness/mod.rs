//! Config-driven experiments: detuning and angle sweeps, moving-frame
//! density profiles, transmission scans and theory predictions, with their
//! CSV and JSON output.

pub mod config;
pub mod experiments;
pub mod export;

pub use config::{load_config, DeltaUnits, ExperimentConfig, ExperimentKind};
pub use experiments::{
    run_angle_sweep, run_delta_sweep, run_density_profile, run_experiment, Outcome, RunRecord,
    SweepPoint, SweepResult, SCHEMA_VERSION,
};
