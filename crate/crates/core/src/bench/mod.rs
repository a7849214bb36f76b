//! Synthetic instances, error metrics and seeded Monte-Carlo sweeps.
//!
//! Every run draws its instance from a ChaCha8 stream seeded by
//! [`run_seed`]`(seed, ratio, mc_index)`, so results do not depend on the
//! number of workers or on the order in which runs execute.

mod config;
mod generate;
mod harness;
mod metrics;

pub use config::{
    outlier_count, OdometryNoise, PgoBenchConfig, RegistrationBenchConfig, Trajectory, DEFAULT_BOUND_SIGMAS,
    DEFAULT_SEED,
};
pub use generate::{
    generate_pgo_instance, generate_registration_instance, random_rotation, trajectory_poses, uniform_in_ball,
    PgoInstance, RegistrationInstance,
};
pub use harness::{
    pgo_sweep, registration_sweep, run_benchmark, run_pgo_trial, run_registration_trial, run_seed, summarize,
    BenchOptions, BenchRecord, BenchSpec, Quartiles, SummaryRow, TrialOutput, SOLVER_FAILURE,
};
pub use metrics::{
    align_2d, median, quantile, rotation_error_deg, trajectory_errors, trajectory_rmse, translation_error,
    TrajectoryErrors,
};
