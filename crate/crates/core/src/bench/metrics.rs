use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::pgo::{rotation2, wrap_angle, Pose2};

/// Geodesic distance between two rotations, in degrees.
///
/// Equal to `acos((tr(R_true^T R_est) - 1) / 2)`, evaluated with `atan2` so
/// that angles near 0 and 180 degrees keep full precision.
pub fn rotation_error_deg(r_est: &Matrix3<f64>, r_true: &Matrix3<f64>) -> f64 {
    let d = r_true.transpose() * r_est;
    let cos = ((d.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let sin = Vector3::new(d[(2, 1)] - d[(1, 2)], d[(0, 2)] - d[(2, 0)], d[(1, 0)] - d[(0, 1)]).norm() / 2.0;
    sin.atan2(cos).to_degrees()
}

pub fn translation_error(t_est: &Vector3<f64>, t_true: &Vector3<f64>) -> f64 {
    (t_est - t_true).norm()
}

/// Rigid 2D transform `(R, t)` minimizing `sum |R a_i + t - b_i|^2`.
pub fn align_2d(a: &[Vector2<f64>], b: &[Vector2<f64>]) -> (Matrix2<f64>, Vector2<f64>) {
    let n = a.len().max(1) as f64;
    let a_bar = a.iter().sum::<Vector2<f64>>() / n;
    let b_bar = b.iter().sum::<Vector2<f64>>() / n;
    let (mut dot, mut cross) = (0.0, 0.0);
    for (p, q) in a.iter().zip(b) {
        let (p, q) = (p - a_bar, q - b_bar);
        dot += p.x * q.x + p.y * q.y;
        cross += p.x * q.y - p.y * q.x;
    }
    let r = rotation2(cross.atan2(dot));
    (r, b_bar - r * a_bar)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryErrors {
    /// Root mean squared position error after rigid alignment.
    pub rmse: f64,
    pub mean_position_error: f64,
    pub mean_heading_error_deg: f64,
}

/// Align the estimated positions to the ground truth with a 2D rigid fit,
/// then measure. Returns `None` for mismatched or empty trajectories.
pub fn trajectory_errors(est: &[Pose2], truth: &[Pose2]) -> Option<TrajectoryErrors> {
    if est.len() != truth.len() || est.is_empty() {
        return None;
    }
    let a: Vec<_> = est.iter().map(Pose2::translation).collect();
    let b: Vec<_> = truth.iter().map(Pose2::translation).collect();
    let (r, t) = align_2d(&a, &b);
    let dtheta = r[(1, 0)].atan2(r[(0, 0)]);
    let n = est.len() as f64;
    let (mut sq, mut lin, mut head) = (0.0, 0.0, 0.0);
    for ((p, q), (pe, pt)) in a.iter().zip(&b).zip(est.iter().zip(truth)) {
        let d = (r * p + t - q).norm();
        sq += d * d;
        lin += d;
        head += wrap_angle(pe.theta + dtheta - pt.theta).abs();
    }
    Some(TrajectoryErrors {
        rmse: (sq / n).sqrt(),
        mean_position_error: lin / n,
        mean_heading_error_deg: (head / n).to_degrees(),
    })
}

pub fn trajectory_rmse(est: &[Pose2], truth: &[Pose2]) -> Option<f64> {
    trajectory_errors(est, truth).map(|e| e.rmse)
}

/// Linear-interpolated quantile of finite values, `q` in `[0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Unit};

    #[test]
    fn rotation_error_basics() {
        let i = Matrix3::identity();
        assert_eq!(rotation_error_deg(&i, &i), 0.0);
        for axis in [Vector3::x(), Vector3::new(1.0, 2.0, -1.0)] {
            let r = Rotation3::from_axis_angle(&Unit::new_normalize(axis), std::f64::consts::PI);
            assert!((rotation_error_deg(r.matrix(), &i) - 180.0).abs() < 1e-6);
        }
    }

    #[test]
    fn translation_error_basics() {
        let a = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(translation_error(&a, &a), 0.0);
        assert_eq!(translation_error(&(a + Vector3::y()), &a), 1.0);
    }

    #[test]
    fn trajectory_gauge_offset_vanishes() {
        let truth: Vec<_> = (0..8).map(|i| Pose2::new(i as f64, (i * i) as f64 * 0.1, 0.2 * i as f64)).collect();
        let g = Pose2::new(3.0, -1.0, 0.8);
        let moved: Vec<_> = truth.iter().map(|p| g.compose(p)).collect();
        let e = trajectory_errors(&moved, &truth).unwrap();
        assert!(e.rmse < 1e-12);
        assert!(e.mean_heading_error_deg < 1e-10);
        assert_eq!(trajectory_rmse(&truth, &truth), Some(0.0));
        assert_eq!(trajectory_rmse(&truth[..3], &truth), None);
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), Some(2.5));
        assert_eq!(quantile(&[0.0, 10.0], 0.25), Some(2.5));
        assert_eq!(median(&[f64::NAN]), None);
    }
}
