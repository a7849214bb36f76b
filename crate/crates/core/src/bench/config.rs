use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Registration sweep: a cloud in a box, a random rigid motion, Gaussian
/// inlier noise and outliers drawn inside a sphere around the moved cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistrationBenchConfig {
    pub m: usize,
    pub box_half_width: f64,
    pub max_translation_norm: f64,
    pub inlier_noise_std: f64,
    pub outlier_sphere_diameter: f64,
    pub outlier_ratios: Vec<f64>,
    pub mc_runs: usize,
    pub seed: u64,
    /// Largest inlier error (length units). Residuals are divided by its
    /// square, so an inlier threshold of 1 corresponds to this bound.
    pub inlier_bound: f64,
    /// Path of the source cloud, recorded for the manifest only.
    pub source_path: Option<String>,
    /// Loaded source cloud. `None` draws uniform points in the box.
    #[serde(skip)]
    pub source_cloud: Option<Vec<Vector3<f64>>>,
}

impl Default for RegistrationBenchConfig {
    fn default() -> Self {
        Self {
            m: 100,
            box_half_width: 0.5,
            max_translation_norm: 3.0,
            inlier_noise_std: 0.001,
            outlier_sphere_diameter: 3f64.sqrt(),
            outlier_ratios: (0..10).map(|k| k as f64 / 10.0).collect(),
            mc_runs: 20,
            seed: DEFAULT_SEED,
            inlier_bound: 5.0 * 0.001,
            source_path: None,
            source_cloud: None,
        }
    }
}

/// Fixed seed used whenever none is given.
pub const DEFAULT_SEED: u64 = 20_231_001;

/// `floor(ratio * m)`, robust to ratios like 0.29 that are not exact in binary.
pub fn outlier_count(ratio: f64, m: usize) -> usize {
    (ratio * m as f64 + 1e-9).floor() as usize
}

fn check_fractions(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid(format!("{name} must not be empty")));
    }
    if values.iter().any(|r| !(0.0..1.0).contains(r)) {
        return Err(Error::invalid(format!("{name} must lie in [0, 1)")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!("{name} must be strictly ascending")));
    }
    Ok(())
}

impl RegistrationBenchConfig {
    pub fn precision(&self) -> f64 {
        1.0 / (self.inlier_bound * self.inlier_bound)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 3 {
            return Err(Error::invalid("m must be at least 3"));
        }
        check_fractions("outlier ratios", &self.outlier_ratios)?;
        for &r in &self.outlier_ratios {
            if self.m - outlier_count(r, self.m) < 3 {
                return Err(Error::invalid(format!(
                    "outlier ratio {r} leaves fewer than 3 inliers out of {}",
                    self.m
                )));
            }
        }
        let positive = [
            self.box_half_width,
            self.max_translation_norm,
            self.outlier_sphere_diameter,
            self.inlier_bound,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(
                "box width, translation norm, sphere diameter and inlier bound must be positive",
            ));
        }
        if !(self.inlier_noise_std >= 0.0 && self.inlier_noise_std.is_finite()) {
            return Err(Error::invalid("inlier noise std must be nonnegative"));
        }
        if self.mc_runs == 0 {
            return Err(Error::invalid("mc_runs must be positive"));
        }
        if let Some(cloud) = &self.source_cloud {
            if cloud.len() < self.m {
                return Err(Error::invalid(format!(
                    "source cloud has {} points, {} requested",
                    cloud.len(),
                    self.m
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Trajectory {
    /// One lap around a circle, closed by a final loop closure.
    Circle,
    /// Back-and-forth rows (lawnmower).
    Grid,
    /// Unit steps on a lattice with random right-angle turns.
    Manhattan,
}

impl FromStr for Trajectory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "circle" => Ok(Trajectory::Circle),
            "grid" => Ok(Trajectory::Grid),
            "manhattan" => Ok(Trajectory::Manhattan),
            _ => Err(Error::invalid(format!("unknown trajectory `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdometryNoise {
    pub trans_std: f64,
    /// Radians.
    pub rot_std: f64,
}

/// Synthetic pose-graph sweep: odometry is kept, a fraction of the loop
/// closures is replaced by random relative poses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PgoBenchConfig {
    pub n_poses: usize,
    pub trajectory: Trajectory,
    pub odometry_noise: OdometryNoise,
    pub loop_closure_count: usize,
    pub corrupted_fractions: Vec<f64>,
    pub kappa: f64,
    pub tau: f64,
    pub mc_runs: usize,
    pub seed: u64,
    /// Distance between consecutive poses.
    pub step_length: f64,
    /// Loop closures join poses at most this far apart.
    pub loop_closure_radius: f64,
    /// Corrupted translations are uniform in `[-extent, extent]^2`.
    pub corruption_extent: f64,
}

/// Inlier bound in standard deviations used for the default `kappa`, `tau`.
pub const DEFAULT_BOUND_SIGMAS: f64 = 5.0;

impl Default for PgoBenchConfig {
    fn default() -> Self {
        let noise = OdometryNoise {
            trans_std: 0.01,
            rot_std: 0.5f64.to_radians(),
        };
        let (kappa, tau) = PgoBenchConfig::information_for(&noise, DEFAULT_BOUND_SIGMAS);
        Self {
            n_poses: 100,
            trajectory: Trajectory::Circle,
            odometry_noise: noise,
            loop_closure_count: 30,
            corrupted_fractions: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            kappa,
            tau,
            mc_runs: 10,
            seed: DEFAULT_SEED,
            step_length: 1.0,
            loop_closure_radius: 5.0,
            corruption_extent: 10.0,
        }
    }
}

impl PgoBenchConfig {
    /// `(kappa, tau)` scaling an edge at `bound_sigmas` standard deviations
    /// to a squared residual of about 1. `|R(phi) - I|_F^2 ~ 2 phi^2`.
    pub fn information_for(noise: &OdometryNoise, bound_sigmas: f64) -> (f64, f64) {
        let kappa = 1.0 / (2.0 * (bound_sigmas * noise.rot_std).powi(2));
        let tau = 1.0 / (bound_sigmas * noise.trans_std).powi(2);
        (kappa, tau)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_poses < 3 {
            return Err(Error::invalid("n_poses must be at least 3"));
        }
        check_fractions("corrupted fractions", &self.corrupted_fractions)?;
        let positive = [
            self.kappa,
            self.tau,
            self.step_length,
            self.loop_closure_radius,
            self.corruption_extent,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(
                "kappa, tau, step length, loop closure radius and corruption extent must be positive",
            ));
        }
        let OdometryNoise { trans_std, rot_std } = self.odometry_noise;
        if !(trans_std >= 0.0 && rot_std >= 0.0) {
            return Err(Error::invalid("odometry noise must be nonnegative"));
        }
        if self.mc_runs == 0 {
            return Err(Error::invalid("mc_runs must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RegistrationBenchConfig::default().validate().unwrap();
        PgoBenchConfig::default().validate().unwrap();
    }

    #[test]
    fn outlier_count_floor() {
        assert_eq!(outlier_count(0.5, 100), 50);
        assert_eq!(outlier_count(0.29, 100), 29);
        assert_eq!(outlier_count(0.7, 100), 70);
        assert_eq!(outlier_count(0.55, 10), 5);
    }

    #[test]
    fn rejects_ratio_leaving_too_few_inliers() {
        let cfg = RegistrationBenchConfig {
            m: 10,
            outlier_ratios: vec![0.8],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RegistrationBenchConfig {
            outlier_ratios: vec![0.5, 0.2],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
