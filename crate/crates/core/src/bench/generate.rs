use std::f64::consts::PI;

use nalgebra::{Quaternion, UnitQuaternion, Vector2, Vector3};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};

use super::config::{outlier_count, PgoBenchConfig, RegistrationBenchConfig, Trajectory};
use crate::error::{Error, Result};
use crate::io::downsample_and_box;
use crate::pgo::{odometry_initialization, Edge2, EdgeKind, Pose2, PoseGraph2};
use crate::registration::{CorrespondenceSet, RigidTransform3};

#[derive(Clone, Debug)]
pub struct RegistrationInstance {
    pub correspondences: CorrespondenceSet,
    pub ground_truth: RigidTransform3,
    /// `true` for inliers.
    pub inlier_mask: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct PgoInstance {
    /// Vertices hold the dead-reckoned odometry chain.
    pub graph: PoseGraph2,
    pub ground_truth: Vec<Pose2>,
    /// One entry per edge, `true` where a loop closure was replaced.
    pub corrupted_mask: Vec<bool>,
}

pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> UnitQuaternion<f64> {
    loop {
        let q = Quaternion::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if q.norm() > 1e-6 {
            return UnitQuaternion::from_quaternion(q);
        }
    }
}

/// Uniform sample from the ball of the given radius.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Vector3<f64> {
    loop {
        let d = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = d.norm();
        if n > 1e-12 {
            let u: f64 = rng.random();
            return d / n * radius * u.cbrt();
        }
    }
}

pub fn generate_registration_instance<R: Rng + ?Sized>(
    cfg: &RegistrationBenchConfig,
    outlier_ratio: f64,
    rng: &mut R,
) -> Result<RegistrationInstance> {
    let cfg_single = RegistrationBenchConfig {
        outlier_ratios: vec![outlier_ratio],
        source_cloud: None,
        ..cfg.clone()
    };
    cfg_single.validate()?;
    let m = cfg.m;
    let w = cfg.box_half_width;

    let source: Vec<Vector3<f64>> = match &cfg.source_cloud {
        Some(cloud) => {
            if cloud.len() < m {
                return Err(Error::invalid(format!(
                    "source cloud has {} points, {m} requested",
                    cloud.len()
                )));
            }
            downsample_and_box(cloud, m, w, rng)?
        }
        None => {
            let u = Uniform::new_inclusive(-w, w).expect("positive box width");
            (0..m)
                .map(|_| Vector3::new(u.sample(rng), u.sample(rng), u.sample(rng)))
                .collect()
        }
    };

    let rotation = random_rotation(rng).to_rotation_matrix().into_inner();
    let translation = uniform_in_ball(rng, cfg.max_translation_norm);
    let truth = RigidTransform3::new(rotation, translation);

    let noise = Normal::new(0.0, cfg.inlier_noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let clean: Vec<Vector3<f64>> = source.iter().map(|p| truth.apply(p)).collect();
    let mut target: Vec<Vector3<f64>> = clean
        .iter()
        .map(|q| q + Vector3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng)))
        .collect();

    let k = outlier_count(outlier_ratio, m);
    let centroid = clean.iter().sum::<Vector3<f64>>() / m as f64;
    let mut inlier_mask = vec![true; m];
    for i in sample(rng, m, k).into_iter() {
        target[i] = centroid + uniform_in_ball(rng, cfg.outlier_sphere_diameter / 2.0);
        inlier_mask[i] = false;
    }

    Ok(RegistrationInstance {
        correspondences: CorrespondenceSet::new(source, target, cfg.precision())?,
        ground_truth: truth,
        inlier_mask,
    })
}

/// Noise-free poses along the configured trajectory, starting at the origin.
pub fn trajectory_poses<R: Rng + ?Sized>(cfg: &PgoBenchConfig, rng: &mut R) -> Vec<Pose2> {
    let n = cfg.n_poses;
    let step = cfg.step_length;
    match cfg.trajectory {
        Trajectory::Circle => {
            let radius = n as f64 * step / (2.0 * PI);
            (0..n)
                .map(|k| {
                    let phi = 2.0 * PI * k as f64 / n as f64;
                    Pose2::new(radius * phi.sin(), radius * (1.0 - phi.cos()), phi)
                })
                .collect()
        }
        Trajectory::Grid => {
            let row = (n as f64).sqrt().ceil() as usize;
            let points: Vec<Vector2<f64>> = (0..n)
                .map(|k| {
                    let (r, c) = (k / row, k % row);
                    let c = if r % 2 == 0 { c } else { row - 1 - c };
                    Vector2::new(c as f64 * step, r as f64 * step)
                })
                .collect();
            headings_from_path(&points)
        }
        Trajectory::Manhattan => {
            let mut points = Vec::with_capacity(n);
            let mut p = Vector2::zeros();
            let mut heading = 0i32;
            for k in 0..n {
                points.push(p);
                if k > 0 && rng.random::<f64>() < 0.25 {
                    heading += if rng.random::<bool>() { 1 } else { -1 };
                }
                let a = heading as f64 * PI / 2.0;
                p += Vector2::new(a.cos(), a.sin()) * step;
            }
            headings_from_path(&points)
        }
    }
}

fn headings_from_path(points: &[Vector2<f64>]) -> Vec<Pose2> {
    let mut theta = 0.0;
    points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            if let Some(next) = points.get(k + 1) {
                let d = next - p;
                theta = d.y.atan2(d.x);
            }
            Pose2::new(p.x, p.y, theta)
        })
        .collect()
}

fn noisy<R: Rng + ?Sized>(delta: Pose2, trans: &Normal<f64>, rot: &Normal<f64>, rng: &mut R) -> Pose2 {
    Pose2::new(
        delta.x + trans.sample(rng),
        delta.y + trans.sample(rng),
        delta.theta + rot.sample(rng),
    )
}

/// Pose graph along a synthetic trajectory.
///
/// Odometry edges join consecutive poses. Loop closures join non-consecutive
/// poses within `loop_closure_radius`; on a circle the edge from the last
/// pose back to the first is always one of them. Exactly
/// `floor(fraction * loop_closures)` loop closures get a uniformly random
/// relative pose instead of the true one.
pub fn generate_pgo_instance<R: Rng + ?Sized>(
    cfg: &PgoBenchConfig,
    corrupted_fraction: f64,
    rng: &mut R,
) -> Result<PgoInstance> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&corrupted_fraction) {
        return Err(Error::invalid("corrupted fraction must lie in [0, 1]"));
    }
    let n = cfg.n_poses;
    let to_err = |e: rand_distr::NormalError| Error::invalid(e.to_string());
    let trans = Normal::new(0.0, cfg.odometry_noise.trans_std).map_err(to_err)?;
    let rot = Normal::new(0.0, cfg.odometry_noise.rot_std).map_err(to_err)?;
    let truth = trajectory_poses(cfg, rng);

    let edge = |from: usize, to: usize, measurement: Pose2, kind: EdgeKind| Edge2 {
        from,
        to,
        measurement,
        kappa: cfg.kappa,
        tau: cfg.tau,
        kind,
    };
    let mut edges: Vec<Edge2> = (0..n - 1)
        .map(|i| {
            let m = noisy(truth[i].between(&truth[i + 1]), &trans, &rot, rng);
            edge(i, i + 1, m, EdgeKind::Odometry)
        })
        .collect();

    let mut pairs = Vec::new();
    if cfg.trajectory == Trajectory::Circle && cfg.loop_closure_count > 0 {
        pairs.push((n - 1, 0));
    }
    let mut candidates = Vec::new();
    for i in 0..n {
        for j in i + 2..n {
            let near = (truth[i].translation() - truth[j].translation()).norm() <= cfg.loop_closure_radius;
            if near && !pairs.contains(&(j, i)) {
                candidates.push((j, i));
            }
        }
    }
    let wanted = cfg.loop_closure_count.saturating_sub(pairs.len()).min(candidates.len());
    let mut chosen: Vec<usize> = sample(rng, candidates.len(), wanted).into_vec();
    chosen.sort_unstable();
    pairs.extend(chosen.into_iter().map(|k| candidates[k]));

    for &(i, j) in &pairs {
        let m = noisy(truth[i].between(&truth[j]), &trans, &rot, rng);
        edges.push(edge(i, j, m, EdgeKind::LoopClosure));
    }

    let loops = pairs.len();
    let corrupt = outlier_count(corrupted_fraction, loops);
    let mut corrupted_mask = vec![false; edges.len()];
    let extent = Uniform::new_inclusive(-cfg.corruption_extent, cfg.corruption_extent)
        .map_err(|e| Error::invalid(e.to_string()))?;
    let angle = Uniform::new(-PI, PI).expect("nonempty angle range");
    for k in sample(rng, loops, corrupt).into_iter() {
        let idx = n - 1 + k;
        edges[idx].measurement = Pose2::new(extent.sample(rng), extent.sample(rng), angle.sample(rng));
        corrupted_mask[idx] = true;
    }

    let mut graph = PoseGraph2 {
        vertices: truth.clone(),
        edges,
    };
    graph.vertices = odometry_initialization(&graph)?;
    Ok(PgoInstance {
        graph,
        ground_truth: truth,
        corrupted_mask,
    })
}
