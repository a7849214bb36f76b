use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Reweighting scheme driven by [`run_robust`](super::run_robust).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    /// Plain weighted least squares: one solve with unit weights.
    None,
    /// Student-t weights with the scale adapted to the residual extremes.
    Eror,
    /// Logistic weights with the threshold set to the weighted residual centroid.
    Esor,
    /// Variational Bayes with a Bernoulli/Gamma outlier indicator and a learned
    /// outlier scale.
    Asor,
    /// Graduated non-convexity on the Geman-McClure cost.
    GncGm,
    /// Graduated non-convexity on the truncated least squares cost.
    GncTls,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::None,
        Method::Eror,
        Method::Esor,
        Method::Asor,
        Method::GncGm,
        Method::GncTls,
    ];

    pub const BAYESIAN: [Method; 3] = [Method::Eror, Method::Esor, Method::Asor];

    pub fn name(self) -> &'static str {
        match self {
            Method::None => "NONE",
            Method::Eror => "EROR",
            Method::Esor => "ESOR",
            Method::Asor => "ASOR",
            Method::GncGm => "GNC_GM",
            Method::GncTls => "GNC_TLS",
        }
    }

    pub fn is_bayesian(self) -> bool {
        matches!(self, Method::Eror | Method::Esor | Method::Asor)
    }

    pub fn is_gnc(self) -> bool {
        matches!(self, Method::GncGm | Method::GncTls)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StoppingRule {
    /// Normalized change of the weighted cost between consecutive iterations.
    #[default]
    CostChange,
    /// Stop as soon as every weighted squared residual is below the inlier
    /// threshold. Faster, slightly less accurate.
    MaxWeightedResidual,
}

impl FromStr for StoppingRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "cost-change" => Ok(StoppingRule::CostChange),
            "max-weighted-residual" => Ok(StoppingRule::MaxWeightedResidual),
            _ => Err(Error::invalid(format!("unknown stopping rule `{s}`"))),
        }
    }
}

/// Priors of the adaptive (ASOR) outlier model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsorHyperParams {
    /// Gamma shape of the outlier indicator prior.
    pub a: f64,
    /// Shape of the Gamma prior on the common outlier rate `b`.
    pub prior_shape: f64,
    /// Rate of the Gamma prior on `b`.
    pub prior_rate: f64,
    /// Initial point estimate of `b`.
    pub b_init: f64,
    /// Prior probability that a channel carries no outlier.
    pub theta: f64,
}

impl Default for AsorHyperParams {
    fn default() -> Self {
        Self {
            a: 0.5,
            prior_shape: 10_000.0,
            prior_rate: 1_000.0,
            b_init: 10_000.0,
            theta: 0.5,
        }
    }
}

impl AsorHyperParams {
    pub fn alpha(&self) -> f64 {
        self.a + 0.5
    }

    /// `(1/theta - 1) * Gamma(alpha) / Gamma(a)`.
    pub fn zeta(&self) -> f64 {
        self.ln_zeta().exp()
    }

    pub fn ln_zeta(&self) -> f64 {
        (1.0 / self.theta - 1.0).ln() + ln_gamma(self.alpha()) - ln_gamma(self.a)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.a > 0.0
            && self.prior_shape > 1.0
            && self.prior_rate > 0.0
            && self.b_init > 0.0
            && self.theta > 0.0
            && self.theta < 1.0
            && [self.a, self.prior_shape, self.prior_rate, self.b_init, self.theta]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "ASOR hyperparameters need a > 0, A > 1, B > 0, b_init > 0, 0 < theta < 1; got {self:?}"
            )))
        }
    }
}

/// Method selection plus every knob of the alternating loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustConfig {
    pub method: Method,
    /// Largest squared residual expected from an inlier. Doubles as the
    /// floor on EROR's scale and ESOR's threshold, and as GNC's bound.
    pub inlier_threshold_sq: f64,
    pub asor: AsorHyperParams,
    pub convergence_tol: f64,
    pub max_iterations: usize,
    pub stopping_rule: StoppingRule,
    pub weight_sum_floor: f64,
    /// Annealing factor of the GNC control parameter.
    pub gnc_factor: f64,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            method: Method::Esor,
            inlier_threshold_sq: 1.0,
            asor: AsorHyperParams::default(),
            convergence_tol: 1e-5,
            max_iterations: 1000,
            stopping_rule: StoppingRule::CostChange,
            weight_sum_floor: 1e-8,
            gnc_factor: 1.4,
        }
    }
}

impl RobustConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inlier_threshold_sq > 0.0 && self.inlier_threshold_sq.is_finite()) {
            return Err(Error::invalid("inlier_threshold_sq must be positive and finite"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::invalid("convergence_tol must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.weight_sum_floor >= 0.0) {
            return Err(Error::invalid("weight_sum_floor must be nonnegative"));
        }
        if !(self.gnc_factor > 1.0) {
            return Err(Error::invalid("gnc_factor must exceed 1"));
        }
        self.asor.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asor_derived_constants() {
        let hp = AsorHyperParams::default();
        assert_eq!(hp.alpha(), 1.0);
        // Gamma(1)/Gamma(0.5) = 1/sqrt(pi), (1/0.5 - 1) = 1
        assert!((hp.zeta() - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let mut hp = AsorHyperParams::default();
        hp.prior_shape = 1.0;
        assert!(hp.validate().is_err());
        hp = AsorHyperParams { theta: 1.0, ..Default::default() };
        assert!(hp.validate().is_err());
        hp = AsorHyperParams { a: 0.0, ..Default::default() };
        assert!(hp.validate().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(RobustConfig::default().validate().is_ok());
        let bad = RobustConfig { max_iterations: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = RobustConfig { inlier_threshold_sq: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn method_parsing() {
        assert_eq!("esor".parse::<Method>().unwrap(), Method::Esor);
        assert_eq!("gnc-tls".parse::<Method>().unwrap(), Method::GncTls);
        assert!("bogus".parse::<Method>().is_err());
        assert_eq!(
            "max-weighted-residual".parse::<StoppingRule>().unwrap(),
            StoppingRule::MaxWeightedResidual
        );
    }
}
