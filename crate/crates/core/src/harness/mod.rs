//! Seeded Monte Carlo experiments and their output files.
//!
//! Replications and sweep points run as independent jobs on the rayon pool.
//! Each job derives its own random streams from `(seed, stream id)`, so a row
//! is reproduced exactly by re-running its seed under the same config hash.

mod config;
mod experiments;
mod icsi;
pub mod output;

pub use config::ExperimentConfig;
pub use experiments::{
    feasibility_experiment, free_coordinates, meets_targets, op_count_report, op_count_row, pilot_overhead_report,
    run_convergence, run_replications, run_scheme, streams, sweep, ExperimentResult, FeasibilityReport, OpCountRow,
    PilotOverhead, RunFailure, RunOutput, RunRecord, Scenario, SweepAxis, SweepRow, SETTLING_BAND,
};
pub use icsi::{delayed_icsi_design, POWER_CONTROL_ROUNDS};
