use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::config::{Method, RobustConfig, StoppingRule};
use super::weights::{
    asor_iteration_update, eror_mu_update, eror_weight, esor_rho_update, esor_weight,
    gnc_baseline_update, AsorState, GncControl,
};
use crate::error::{Error, Result};

/// A residual model paired with a non-minimal solver for its weighted
/// least-squares problem `argmin_x sum_i w_i r_i(x)^2`.
///
/// The optional prior term (index 0) always enters the solve with weight 1;
/// `solve` receives the weights of the `measurement_count()` measurements only.
pub trait WeightedProblem {
    type Estimate: Clone;

    fn measurement_count(&self) -> usize;

    fn solve(
        &self,
        weights: &[f64],
        warm_start: Option<&Self::Estimate>,
    ) -> Result<Self::Estimate>;

    /// Precision-scaled squared residuals of the measurements at `estimate`.
    fn squared_residuals(&self, estimate: &Self::Estimate) -> Vec<f64>;

    fn prior_squared_residual(&self, _estimate: &Self::Estimate) -> Option<f64> {
        None
    }
}

/// Squared residuals at one estimate plus the weighted cost they produce.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualEvaluation {
    pub prior: Option<f64>,
    pub measurements: Vec<f64>,
    pub weighted_cost: f64,
}

impl ResidualEvaluation {
    pub fn evaluate<P: WeightedProblem>(problem: &P, estimate: &P::Estimate, weights: &[f64]) -> Self {
        let prior = problem.prior_squared_residual(estimate);
        let measurements = problem.squared_residuals(estimate);
        let weighted_cost = prior.unwrap_or(0.0)
            + weights.iter().zip(&measurements).map(|(w, r)| w * r).sum::<f64>();
        Self {
            prior,
            measurements,
            weighted_cost,
        }
    }
}

/// Method-specific latent parameters. Only the active method's variant exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LatentState {
    Plain,
    Eror { mu: f64 },
    Esor { rho_sq: f64 },
    Asor(AsorState),
    Gnc(GncControl),
}

impl LatentState {
    fn initial(config: &RobustConfig) -> Self {
        match config.method {
            Method::None => LatentState::Plain,
            Method::Eror => LatentState::Eror {
                mu: config.inlier_threshold_sq,
            },
            Method::Esor => LatentState::Esor {
                rho_sq: config.inlier_threshold_sq,
            },
            Method::Asor => LatentState::Asor(AsorState::new(&config.asor)),
            Method::GncGm | Method::GncTls => LatentState::Gnc(GncControl::default()),
        }
    }

    /// mu (EROR, GNC), rho^2 (ESOR) or b_hat (ASOR).
    pub fn scalar(&self) -> Option<f64> {
        match self {
            LatentState::Plain => None,
            LatentState::Eror { mu } => Some(*mu),
            LatentState::Esor { rho_sq } => Some(*rho_sq),
            LatentState::Asor(s) => Some(s.b_hat),
            LatentState::Gnc(c) => c.mu,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightState {
    /// Weights of the measurements, index `i` here is measurement `i + 1`.
    pub weights: Vec<f64>,
    /// Set when the problem carries a prior term; its weight is pinned to 1.
    pub prior_pinned: bool,
    pub latent: LatentState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    Converged,
    MaxIters,
    WeightSumFloor,
    MaxWeightedResidualMet,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Converged => "CONVERGED",
            StopReason::MaxIters => "MAX_ITERS",
            StopReason::WeightSumFloor => "WEIGHT_SUM_FLOOR",
            StopReason::MaxWeightedResidualMet => "MAX_WEIGHTED_RESIDUAL_MET",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    /// Cost minimized by this iteration's variable update.
    pub weighted_cost: f64,
    /// Latent scalar after the parametric update, see [`LatentState::scalar`].
    pub parameter: Option<f64>,
    pub weight_min: f64,
    pub weight_max: f64,
    pub weight_mean: f64,
    pub elapsed: Duration,
}

impl IterationRecord {
    /// Same record without the wall-clock field.
    pub fn numeric(&self) -> (f64, Option<f64>, f64, f64, f64) {
        (
            self.weighted_cost,
            self.parameter,
            self.weight_min,
            self.weight_max,
            self.weight_mean,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub iterations: Vec<IterationRecord>,
    pub stop_reason: StopReason,
}

impl RunTrace {
    pub fn iteration_count(&self) -> usize {
        self.iterations.len()
    }
}

#[derive(Clone, Debug)]
pub struct RobustOutcome<E> {
    pub estimate: E,
    pub state: WeightState,
    pub trace: RunTrace,
}

/// Normalized change of the weighted cost between consecutive iterations.
pub fn normalized_cost_change(previous: f64, current: f64) -> f64 {
    (current - previous).abs() / current.max(1e-12)
}

/// Alternate variable, residual, parametric and weight updates until the
/// configured stopping rule fires.
///
/// `initial_guess` only warm-starts the first solve. Every later solve is
/// warm-started from the previous iterate.
pub fn run_robust<P: WeightedProblem>(
    problem: &P,
    config: &RobustConfig,
    initial_guess: Option<P::Estimate>,
) -> Result<RobustOutcome<P::Estimate>> {
    config.validate()?;
    let m = problem.measurement_count();
    if m == 0 {
        return Err(Error::invalid("problem has no measurement residuals"));
    }
    let c_sq = config.inlier_threshold_sq;
    let start = Instant::now();

    let mut weights = vec![1.0; m];
    let mut latent = LatentState::initial(config);
    let mut previous = initial_guess;
    let mut previous_cost: Option<f64> = None;
    let mut iterations = Vec::new();

    for k in 1..=config.max_iterations {
        let estimate = problem
            .solve(&weights, previous.as_ref())
            .map_err(|e| Error::Solver {
                iteration: k,
                source: Box::new(e),
            })?;
        let eval = ResidualEvaluation::evaluate(problem, &estimate, &weights);
        let prior_pinned = eval.prior.is_some();
        let r = &eval.measurements;
        if r.len() != m || r.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Solver {
                iteration: k,
                source: Box::new(Error::invalid("residuals must be finite and nonnegative")),
            });
        }
        let cost = eval.weighted_cost;

        let old_weights = match config.method {
            Method::GncGm => Some(weights.clone()),
            _ => None,
        };
        let mut weight_sum_exception = false;
        match &mut latent {
            LatentState::Plain => {}
            LatentState::Eror { mu } => {
                *mu = eror_mu_update(r, c_sq)?;
                for (w, &ri) in weights.iter_mut().zip(r) {
                    *w = eror_weight(ri, *mu)?;
                }
            }
            LatentState::Esor { rho_sq } => {
                let (ws, rs): (Vec<f64>, Vec<f64>) = match eval.prior {
                    Some(r0) => (
                        std::iter::once(1.0).chain(weights.iter().copied()).collect(),
                        std::iter::once(r0).chain(r.iter().copied()).collect(),
                    ),
                    None => (weights.clone(), r.clone()),
                };
                match esor_rho_update(&ws, &rs, c_sq) {
                    Ok(v) => {
                        *rho_sq = v;
                        for (w, &ri) in weights.iter_mut().zip(r) {
                            *w = esor_weight(ri, *rho_sq)?;
                        }
                    }
                    Err(Error::WeightSum { .. }) => weight_sum_exception = true,
                    Err(e) => return Err(e),
                }
            }
            LatentState::Asor(state) => {
                weights = asor_iteration_update(r, state, &config.asor)?;
            }
            LatentState::Gnc(control) => {
                weights = gnc_baseline_update(config.method, r, control, c_sq, config.gnc_factor)?;
            }
        }

        iterations.push(summarize(cost, latent.scalar(), &weights, start.elapsed()));
        let outcome = |estimate, weights, latent, stop_reason, iterations| RobustOutcome {
            estimate,
            state: WeightState {
                weights,
                prior_pinned,
                latent,
            },
            trace: RunTrace {
                iterations,
                stop_reason,
            },
        };

        if config.method == Method::None {
            return Ok(outcome(estimate, weights, latent, StopReason::Converged, iterations));
        }
        let weight_sum: f64 = weights.iter().sum();
        if weight_sum_exception || weight_sum < config.weight_sum_floor {
            return Ok(outcome(estimate, weights, latent, StopReason::WeightSumFloor, iterations));
        }
        if config.stopping_rule == StoppingRule::MaxWeightedResidual && config.method.is_bayesian() {
            let worst = weights.iter().zip(r).map(|(w, ri)| w * ri).fold(0.0, f64::max);
            if worst < c_sq {
                return Ok(outcome(
                    estimate,
                    weights,
                    latent,
                    StopReason::MaxWeightedResidualMet,
                    iterations,
                ));
            }
        }
        let converged = match (config.method, &latent) {
            (Method::GncGm, LatentState::Gnc(GncControl { mu: Some(mu) })) => {
                let old = old_weights.as_deref().unwrap_or(&[]);
                let delta = old
                    .iter()
                    .zip(&weights)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                *mu <= 1.0 && delta < config.convergence_tol
            }
            _ => previous_cost
                .map(|prev| normalized_cost_change(prev, cost) < config.convergence_tol)
                .unwrap_or(false),
        };
        if converged || k == config.max_iterations {
            let reason = if converged {
                StopReason::Converged
            } else {
                StopReason::MaxIters
            };
            return Ok(outcome(estimate, weights, latent, reason, iterations));
        }
        previous_cost = Some(cost);
        previous = Some(estimate);
    }
    unreachable!("loop returns on its last iteration")
}

fn summarize(cost: f64, parameter: Option<f64>, weights: &[f64], elapsed: Duration) -> IterationRecord {
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &w in weights {
        lo = lo.min(w);
        hi = hi.max(w);
        sum += w;
    }
    IterationRecord {
        weighted_cost: cost,
        parameter,
        weight_min: lo,
        weight_max: hi,
        weight_mean: sum / weights.len() as f64,
        elapsed,
    }
}
