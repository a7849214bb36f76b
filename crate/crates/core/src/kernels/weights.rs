//! Weight and parameter updates of the reweighting schemes.
//!
//! Every function here is pure. Residuals are always *squared* and already
//! scaled by the measurement precision.

use serde::{Deserialize, Serialize};

use super::config::{AsorHyperParams, Method};
use crate::error::{Error, Result};

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {v}")))
    }
}

fn check_residual(r_sq: f64) -> Result<()> {
    check_finite("squared residual", r_sq)?;
    if r_sq < 0.0 {
        return Err(Error::invalid(format!("squared residual must be >= 0, got {r_sq}")));
    }
    Ok(())
}

/// Logistic function evaluated without overflow for either sign.
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// EROR weight `1 / (1 + r^2 / mu)`.
pub fn eror_weight(r_sq: f64, mu: f64) -> Result<f64> {
    check_residual(r_sq)?;
    check_finite("mu", mu)?;
    if mu <= 0.0 {
        return Err(Error::invalid(format!("mu must be positive, got {mu}")));
    }
    Ok(1.0 / (1.0 + r_sq / mu))
}

/// EROR scale: mean of the largest and smallest measurement residual, floored
/// at `chi`. The prior term (if any) must not be part of `squared_residuals`.
pub fn eror_mu_update(squared_residuals: &[f64], chi: f64) -> Result<f64> {
    if squared_residuals.is_empty() {
        return Err(Error::invalid("EROR scale update needs at least one residual"));
    }
    check_finite("chi", chi)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &r in squared_residuals {
        check_residual(r)?;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((0.5 * (hi + lo)).max(chi))
}

/// ESOR weight `1 / (1 + exp(0.5 (r^2 - rho^2)))`. Saturates to exactly 0 for
/// huge residuals instead of producing NaN.
pub fn esor_weight(r_sq: f64, rho_sq: f64) -> Result<f64> {
    check_residual(r_sq)?;
    check_finite("rho_sq", rho_sq)?;
    if rho_sq <= 0.0 {
        return Err(Error::invalid(format!("rho_sq must be positive, got {rho_sq}")));
    }
    Ok(sigmoid(-0.5 * (r_sq - rho_sq)))
}

/// ESOR threshold: weighted centroid of the squared residuals, floored at
/// `gamma`. Both slices cover every present index, prior term included.
///
/// A zero weight sum is reported as [`Error::WeightSum`]; the outer loop
/// treats it as its weight-floor exception.
pub fn esor_rho_update(weights: &[f64], squared_residuals: &[f64], gamma: f64) -> Result<f64> {
    if weights.len() != squared_residuals.len() {
        return Err(Error::invalid(format!(
            "weights ({}) and residuals ({}) differ in length",
            weights.len(),
            squared_residuals.len()
        )));
    }
    check_finite("gamma", gamma)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&w, &r) in weights.iter().zip(squared_residuals) {
        check_residual(r)?;
        num += w * r;
        den += w;
    }
    if !(den > 0.0) {
        return Err(Error::WeightSum { sum: den });
    }
    Ok((num / den).max(gamma))
}

/// Latent variables of the ASOR posterior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsorState {
    /// Posterior Gamma rate of each indicator's outlier component.
    pub beta: Vec<f64>,
    /// Posterior probability that each channel is outlier-free. Rounds to 0
    /// for very large residuals; `log_odds` keeps the exact value.
    pub omega: Vec<f64>,
    /// `ln((1 - omega) / omega)` of each channel, finite for any finite residual.
    pub log_odds: Vec<f64>,
    /// Point estimate of the common outlier rate.
    pub b_hat: f64,
}

impl AsorState {
    pub fn new(hp: &AsorHyperParams) -> Self {
        Self {
            beta: Vec::new(),
            omega: Vec::new(),
            log_odds: Vec::new(),
            b_hat: hp.b_init,
        }
    }

    /// `(ln omega, ln(1 - omega))` of channel `i`.
    pub fn ln_omega(&self, i: usize) -> (f64, f64) {
        let t = self.log_odds[i];
        (-softplus(t), -softplus(-t))
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// One ASOR parametric + weight update.
///
/// Order: `beta` from the current `b_hat`, then `omega`, then `b_hat`, then the
/// weights (which reuse the `beta` of this pass). Returns the new weights.
pub fn asor_iteration_update(
    squared_residuals: &[f64],
    state: &mut AsorState,
    hp: &AsorHyperParams,
) -> Result<Vec<f64>> {
    if !(state.b_hat > 0.0 && state.b_hat.is_finite()) {
        return Err(Error::invalid(format!("b_hat must be positive, got {}", state.b_hat)));
    }
    let alpha = hp.alpha();
    let ln_zeta = hp.ln_zeta();
    let ln_b = state.b_hat.ln();

    state.beta.clear();
    state.omega.clear();
    state.log_odds.clear();
    for &r in squared_residuals {
        check_residual(r)?;
        let beta = 0.5 * r + state.b_hat;
        // omega = 1 / (1 + zeta b^a / beta^alpha * exp(r/2)), in log space.
        let log_odds = ln_zeta + hp.a * ln_b - alpha * beta.ln() + 0.5 * r;
        state.beta.push(beta);
        state.omega.push(sigmoid(-log_odds));
        state.log_odds.push(log_odds);
    }

    let mut shape = hp.prior_shape - 1.0;
    let mut rate = hp.prior_rate;
    for (&om, &beta) in state.omega.iter().zip(&state.beta) {
        shape += hp.a * (1.0 - om);
        rate += (1.0 - om) * alpha / beta;
    }
    state.b_hat = shape / rate;

    Ok(state
        .omega
        .iter()
        .zip(&state.beta)
        .map(|(&om, &beta)| om + (1.0 - om) * alpha / beta)
        .collect())
}

/// Control parameter of a GNC schedule. `mu` is set from the first residuals.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GncControl {
    pub mu: Option<f64>,
}

const GNC_TLS_MU_ALL_INLIERS: f64 = 1e12;

/// Initial GNC control parameter for the given residuals.
///
/// GM starts at `2 max r^2 / c^2` and anneals down to 1; TLS starts at
/// `c^2 / (2 max r^2 - c^2)` and anneals up.
pub fn gnc_initial_mu(method: Method, squared_residuals: &[f64], c_sq: f64) -> Result<f64> {
    let r_max = squared_residuals.iter().copied().fold(0.0, f64::max);
    match method {
        Method::GncGm => Ok((2.0 * r_max / c_sq).max(1.0)),
        Method::GncTls => {
            let den = 2.0 * r_max - c_sq;
            if den > 0.0 {
                Ok(c_sq / den)
            } else {
                // every residual already inside the bound
                Ok(GNC_TLS_MU_ALL_INLIERS)
            }
        }
        other => Err(Error::invalid(format!("{other} is not a GNC method"))),
    }
}

/// GNC weight for one residual at control parameter `mu`.
pub fn gnc_weight(method: Method, r_sq: f64, mu: f64, c_sq: f64) -> Result<f64> {
    check_residual(r_sq)?;
    match method {
        Method::GncGm => {
            let s = mu * c_sq;
            Ok((s / (r_sq + s)).powi(2))
        }
        Method::GncTls => {
            let upper = (mu + 1.0) / mu * c_sq;
            let lower = mu / (mu + 1.0) * c_sq;
            if r_sq >= upper {
                Ok(0.0)
            } else if r_sq <= lower {
                Ok(1.0)
            } else {
                let w = (c_sq * mu * (mu + 1.0) / r_sq).sqrt() - mu;
                Ok(w.clamp(0.0, 1.0))
            }
        }
        other => Err(Error::invalid(format!("{other} is not a GNC method"))),
    }
}

/// Weights at the current control value, then one annealing step.
pub fn gnc_baseline_update(
    method: Method,
    squared_residuals: &[f64],
    control: &mut GncControl,
    c_sq: f64,
    factor: f64,
) -> Result<Vec<f64>> {
    let mu = match control.mu {
        Some(mu) => mu,
        None => gnc_initial_mu(method, squared_residuals, c_sq)?,
    };
    let weights = squared_residuals
        .iter()
        .map(|&r| gnc_weight(method, r, mu, c_sq))
        .collect::<Result<Vec<_>>>()?;
    control.mu = Some(match method {
        Method::GncGm => (mu / factor).max(1.0),
        _ => mu * factor,
    });
    Ok(weights)
}
