//! Method-agnostic robust loop and the reweighting rules it drives.
//!
//! Each iteration performs a variable update (the injected weighted solver),
//! a residual update, a parametric update and a weight update. The three
//! Bayesian schemes differ only in the last two steps:
//!
//! | method | parameter                              | weight                                |
//! |--------|----------------------------------------|---------------------------------------|
//! | EROR   | `mu = max((r2_max + r2_min) / 2, chi)` | `1 / (1 + r2 / mu)`                   |
//! | ESOR   | `rho2 = max(sum w r2 / sum w, gamma)`  | `1 / (1 + exp((r2 - rho2) / 2))`      |
//! | ASOR   | `beta`, `omega`, `b_hat`               | `omega + (1 - omega) alpha / beta`    |
//!
//! GNC-GM and GNC-TLS are provided as baselines.

mod config;
mod runner;
mod weights;

pub use config::{AsorHyperParams, Method, RobustConfig, StoppingRule};
pub use runner::{
    normalized_cost_change, run_robust, IterationRecord, LatentState, ResidualEvaluation,
    RobustOutcome, RunTrace, StopReason, WeightState, WeightedProblem,
};
pub use weights::{
    asor_iteration_update, eror_mu_update, eror_weight, esor_rho_update, esor_weight,
    gnc_baseline_update, gnc_initial_mu, gnc_weight, AsorState, GncControl,
};
