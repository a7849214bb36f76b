//! Weighted closed-form registration of 3D correspondences.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::WeightedProblem;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform3 {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform3 {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `R^T R = I` and `det R = +1` within `tol`.
    pub fn is_proper(&self, tol: f64) -> bool {
        let ortho = (self.rotation.transpose() * self.rotation - Matrix3::identity()).abs().max();
        ortho <= tol && (self.rotation.determinant() - 1.0).abs() <= tol
    }
}

/// Putative correspondences `p_i -> q_i` with an isotropic precision each.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrespondenceSet {
    source: Vec<Vector3<f64>>,
    target: Vec<Vector3<f64>>,
    precision: Vec<f64>,
}

impl CorrespondenceSet {
    /// Same precision for every correspondence.
    pub fn new(source: Vec<Vector3<f64>>, target: Vec<Vector3<f64>>, precision: f64) -> Result<Self> {
        let n = source.len();
        Self::with_precisions(source, target, vec![precision; n])
    }

    pub fn with_precisions(
        source: Vec<Vector3<f64>>,
        target: Vec<Vector3<f64>>,
        precision: Vec<f64>,
    ) -> Result<Self> {
        if source.len() != target.len() || source.len() != precision.len() {
            return Err(Error::invalid(format!(
                "correspondence lengths differ: {} sources, {} targets, {} precisions",
                source.len(),
                target.len(),
                precision.len()
            )));
        }
        if source.len() < 3 {
            return Err(Error::invalid("registration needs at least 3 correspondences"));
        }
        let finite = |v: &Vector3<f64>| v.iter().all(|c| c.is_finite());
        if !source.iter().chain(&target).all(finite) {
            return Err(Error::invalid("correspondence coordinates must be finite"));
        }
        if !precision.iter().all(|p| p.is_finite() && *p > 0.0) {
            return Err(Error::invalid("precisions must be positive and finite"));
        }
        Ok(Self { source, target, precision })
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn source(&self) -> &[Vector3<f64>] {
        &self.source
    }

    pub fn target(&self) -> &[Vector3<f64>] {
        &self.target
    }

    pub fn precision(&self) -> &[f64] {
        &self.precision
    }
}

/// Closed-form minimizer of `sum_i w_i |q_i - (R p_i + t)|^2` over SE(3).
///
/// Weighted centroids, cross-covariance `H = U S V^T`, and
/// `R = V diag(1, 1, det(V U^T)) U^T`. The precisions of `corr` are *not*
/// folded in; callers pass whatever weights they want minimized.
pub fn horn_weighted(corr: &CorrespondenceSet, weights: &[f64]) -> Result<RigidTransform3> {
    if weights.len() != corr.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} correspondences",
            weights.len(),
            corr.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    let peak = weights.iter().copied().fold(0.0, f64::max);
    if !(total > 0.0) || total <= 1e-300 {
        return Err(Error::WeightSum { sum: total });
    }

    // Normalizing by the largest weight keeps H well scaled for tiny weights.
    let mut p_bar = Vector3::zeros();
    let mut q_bar = Vector3::zeros();
    for ((p, q), w) in corr.source.iter().zip(&corr.target).zip(weights) {
        let w = w / peak;
        p_bar += p * w;
        q_bar += q * w;
    }
    let norm = total / peak;
    p_bar /= norm;
    q_bar /= norm;

    let mut h = Matrix3::zeros();
    for ((p, q), w) in corr.source.iter().zip(&corr.target).zip(weights) {
        h += (p - p_bar) * (q - q_bar).transpose() * (w / peak);
    }

    let svd = h.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateGeometry("SVD of the cross-covariance failed".into())),
    };
    let s = svd.singular_values;
    let s_max = s.max();
    let mut sorted = [s[0], s[1], s[2]];
    sorted.sort_by(|a, b| b.total_cmp(a));
    if !(s_max > 0.0) || sorted[1] <= 1e-12 * s_max {
        return Err(Error::DegenerateGeometry(format!(
            "cross-covariance has rank < 2 (singular values {:?})",
            sorted
        )));
    }
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let rotation = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let translation = q_bar - rotation * p_bar;
    Ok(RigidTransform3 { rotation, translation })
}

/// `precision_i * |q_i - (R p_i + t)|^2` for every correspondence.
pub fn residuals_registration(corr: &CorrespondenceSet, transform: &RigidTransform3) -> Vec<f64> {
    corr.source
        .iter()
        .zip(&corr.target)
        .zip(&corr.precision)
        .map(|((p, q), prec)| prec * (q - transform.apply(p)).norm_squared())
        .collect()
}

/// Weighted cost `sum_i w_i precision_i |q_i - (R p_i + t)|^2`.
pub fn weighted_registration_cost(
    corr: &CorrespondenceSet,
    transform: &RigidTransform3,
    weights: &[f64],
) -> f64 {
    residuals_registration(corr, transform)
        .iter()
        .zip(weights)
        .map(|(r, w)| r * w)
        .sum()
}

impl WeightedProblem for CorrespondenceSet {
    type Estimate = RigidTransform3;

    fn measurement_count(&self) -> usize {
        self.len()
    }

    fn solve(&self, weights: &[f64], _warm_start: Option<&RigidTransform3>) -> Result<RigidTransform3> {
        let effective: Vec<f64> = weights.iter().zip(&self.precision).map(|(w, p)| w * p).collect();
        horn_weighted(self, &effective)
    }

    fn squared_residuals(&self, estimate: &RigidTransform3) -> Vec<f64> {
        residuals_registration(self, estimate)
    }
}
