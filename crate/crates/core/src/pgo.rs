//! SE(2) pose graphs: residuals and a weighted, damped Gauss-Newton solver.
//!
//! The residual of an edge `i -> j` with measurement `(t_ij, R_ij)` is
//!
//! ```text
//! r^2 = kappa |R_j - R_i R_ij|_F^2 + tau |t_j - t_i - R_i t_ij|^2
//! ```
//!
//! evaluated on the 2x2 rotation matrices themselves.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, SMatrix, SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::WeightedProblem;

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

pub fn rotation2(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

fn rotation2_derivative(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(-s, -c, c, -s)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn translation(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        rotation2(self.theta)
    }

    /// `self * delta` (delta expressed in this pose's frame).
    pub fn compose(&self, delta: &Pose2) -> Pose2 {
        let t = self.translation() + self.rotation() * delta.translation();
        Pose2::new(t.x, t.y, self.theta + delta.theta)
    }

    /// Relative pose `self^-1 * other`.
    pub fn between(&self, other: &Pose2) -> Pose2 {
        let t = self.rotation().transpose() * (other.translation() - self.translation());
        Pose2::new(t.x, t.y, other.theta - self.theta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgeKind {
    Odometry,
    LoopClosure,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge2 {
    pub from: usize,
    pub to: usize,
    /// Measured relative pose of `to` in the frame of `from`.
    pub measurement: Pose2,
    pub kappa: f64,
    pub tau: f64,
    pub kind: EdgeKind,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PoseGraph2 {
    /// Initial values; vertex 0 is also the gauge anchor.
    pub vertices: Vec<Pose2>,
    pub edges: Vec<Edge2>,
}

impl PoseGraph2 {
    pub fn validate(&self) -> Result<()> {
        if self.vertices.is_empty() {
            return Err(Error::invalid("pose graph has no vertices"));
        }
        let n = self.vertices.len();
        for (k, e) in self.edges.iter().enumerate() {
            if e.from == e.to || e.from >= n || e.to >= n {
                return Err(Error::invalid(format!(
                    "edge {k} ({} -> {}) is a self loop or out of range for {n} vertices",
                    e.from, e.to
                )));
            }
            if !(e.kappa > 0.0 && e.tau > 0.0 && e.kappa.is_finite() && e.tau.is_finite()) {
                return Err(Error::invalid(format!("edge {k} needs positive finite kappa and tau")));
            }
        }
        let unreachable = self.unreachable_from_anchor(|_, e| e.kind == EdgeKind::Odometry);
        if !unreachable.is_empty() {
            return Err(Error::invalid(format!(
                "odometry edges do not connect vertices {unreachable:?} to vertex 0"
            )));
        }
        Ok(())
    }

    /// Vertices not reachable from vertex 0 using edges that pass `keep`.
    fn unreachable_from_anchor(&self, keep: impl Fn(usize, &Edge2) -> bool) -> Vec<usize> {
        let n = self.vertices.len();
        let mut adj = vec![Vec::new(); n];
        for (_, e) in self.edges.iter().enumerate().filter(|(k, e)| keep(*k, e)) {
            adj[e.from].push(e.to);
            adj[e.to].push(e.from);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        (0..n).filter(|&v| !seen[v]).collect()
    }

    pub fn odometry_edges(&self) -> impl Iterator<Item = &Edge2> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Odometry)
    }

    pub fn loop_closures(&self) -> impl Iterator<Item = &Edge2> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::LoopClosure)
    }
}

/// Dead-reckoning along a breadth-first spanning tree of the odometry edges,
/// starting from the anchored vertex 0.
pub fn odometry_initialization(graph: &PoseGraph2) -> Result<Vec<Pose2>> {
    graph.validate()?;
    let n = graph.vertices.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, e) in graph.edges.iter().enumerate() {
        if e.kind == EdgeKind::Odometry {
            adj[e.from].push(k);
            adj[e.to].push(k);
        }
    }
    let mut poses: Vec<Option<Pose2>> = vec![None; n];
    poses[0] = Some(graph.vertices[0]);
    let mut queue = VecDeque::from([0]);
    while let Some(v) = queue.pop_front() {
        let pv = poses[v].expect("queued vertices are placed");
        for &k in &adj[v] {
            let e = &graph.edges[k];
            let (u, pu) = if e.from == v {
                (e.to, pv.compose(&e.measurement))
            } else {
                let theta = pv.theta - e.measurement.theta;
                let t = pv.translation() - rotation2(theta) * e.measurement.translation();
                (e.from, Pose2::new(t.x, t.y, theta))
            };
            if poses[u].is_none() {
                poses[u] = Some(pu);
                queue.push_back(u);
            }
        }
    }
    Ok(poses.into_iter().map(|p| p.expect("validated graph is connected")).collect())
}

/// Squared residual of one edge, from the matrices directly.
pub fn edge_squared_residual(edge: &Edge2, pi: &Pose2, pj: &Pose2) -> f64 {
    let ri = pi.rotation();
    let rot = pj.rotation() - ri * edge.measurement.rotation();
    let trans = pj.translation() - pi.translation() - ri * edge.measurement.translation();
    edge.kappa * rot.norm_squared() + edge.tau * trans.norm_squared()
}

/// Squared residual of every edge at `poses`.
pub fn residuals_pgo(graph: &PoseGraph2, poses: &[Pose2]) -> Vec<f64> {
    graph
        .edges
        .iter()
        .map(|e| edge_squared_residual(e, &poses[e.from], &poses[e.to]))
        .collect()
}

pub fn weighted_pgo_cost(graph: &PoseGraph2, poses: &[Pose2], weights: &[f64]) -> f64 {
    residuals_pgo(graph, poses).iter().zip(weights).map(|(r, w)| r * w).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussNewtonOptions {
    pub max_iterations: usize,
    /// Relative cost change that ends the inner loop.
    pub tolerance: f64,
    /// Initial damping relative to the mean diagonal of the normal matrix.
    pub initial_damping: f64,
}

impl Default for GaussNewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-10,
            initial_damping: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussNewtonReport {
    pub poses: Vec<Pose2>,
    pub cost: f64,
    pub iterations: usize,
    /// False when the inner cap was hit before the tolerance was met; the
    /// poses are then the best iterate seen.
    pub converged: bool,
}

type EdgeJacobian = SMatrix<f64, 6, 6>;

fn edge_linearization(edge: &Edge2, pi: &Pose2, pj: &Pose2) -> (SVector<f64, 6>, EdgeJacobian) {
    let sk = edge.kappa.sqrt();
    let st = edge.tau.sqrt();
    let ri = pi.rotation();
    let dri = rotation2_derivative(pi.theta);
    let meas_r = edge.measurement.rotation();
    let meas_t = edge.measurement.translation();

    let rot_err = pj.rotation() - ri * meas_r;
    let trans_err = pj.translation() - pi.translation() - ri * meas_t;
    let d_rot_i = -(dri * meas_r);
    let d_rot_j = rotation2_derivative(pj.theta);
    let d_trans_i = -(dri * meas_t);

    let mut e = SVector::<f64, 6>::zeros();
    let mut jac = EdgeJacobian::zeros();
    // columns: x_i, y_i, theta_i, x_j, y_j, theta_j
    for (row, (r, c)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
        e[row] = sk * rot_err[(r, c)];
        jac[(row, 2)] = sk * d_rot_i[(r, c)];
        jac[(row, 5)] = sk * d_rot_j[(r, c)];
    }
    for k in 0..2 {
        let row = 4 + k;
        e[row] = st * trans_err[k];
        jac[(row, k)] = -st;
        jac[(row, 3 + k)] = st;
        jac[(row, 2)] = st * d_trans_i[k];
    }
    (e, jac)
}

/// Solve `A x = b` for symmetric positive definite `A` by a Cholesky
/// factorization restricted to the envelope of each row (the span from its
/// first nonzero to the diagonal). Pose graphs whose loop closures join poses
/// close in index have a narrow envelope. Returns `None` if `A` is not
/// numerically positive definite.
fn envelope_cholesky_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    let first: Vec<usize> = (0..n)
        .map(|i| (0..i).find(|&j| a[(i, j)] != 0.0).unwrap_or(i))
        .collect();
    // row-major lower triangle
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in first[i]..=i {
            let k0 = first[i].max(first[j]);
            let dot: f64 = (k0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            let v = a[(i, j)] - dot;
            if j == i {
                if !(v > 0.0) {
                    return None;
                }
                l[i * n + i] = v.sqrt();
            } else {
                l[i * n + j] = v / l[j * n + j];
            }
        }
    }
    let mut y = b.clone();
    for i in 0..n {
        let dot: f64 = (first[i]..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (y[i] - dot) / l[i * n + i];
    }
    for i in (0..n).rev() {
        y[i] /= l[i * n + i];
        let yi = y[i];
        for k in first[i]..i {
            y[k] -= l[i * n + k] * yi;
        }
    }
    Some(y)
}

/// Minimize `sum_e w_e r_e^2` over all poses but vertex 0.
///
/// Levenberg-style additive damping: the damping grows tenfold on a rejected
/// step and shrinks tenfold on an accepted one, so accepted iterates never
/// increase the weighted cost. Without `warm_start` the poses start from
/// [`odometry_initialization`].
pub fn pgo_gauss_newton_weighted(
    graph: &PoseGraph2,
    weights: &[f64],
    warm_start: Option<&[Pose2]>,
    options: &GaussNewtonOptions,
) -> Result<GaussNewtonReport> {
    graph.validate()?;
    if weights.len() != graph.edges.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} edges",
            weights.len(),
            graph.edges.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("edge weights must be finite and nonnegative"));
    }
    let n = graph.vertices.len();
    let unreachable = graph.unreachable_from_anchor(|k, _| weights[k] > 0.0);
    if !unreachable.is_empty() {
        return Err(Error::RankDeficient { vertices: unreachable });
    }

    let mut poses = match warm_start {
        Some(p) if p.len() == n => p.to_vec(),
        Some(p) => {
            return Err(Error::invalid(format!("warm start has {} poses, graph has {n}", p.len())))
        }
        None => odometry_initialization(graph)?,
    };
    poses[0] = graph.vertices[0];
    let mut cost = weighted_pgo_cost(graph, &poses, weights);
    if n == 1 {
        return Ok(GaussNewtonReport { poses, cost, iterations: 0, converged: true });
    }

    let dim = 3 * (n - 1);
    let slot = |v: usize| if v == 0 { None } else { Some(3 * (v - 1)) };
    let mut lambda: Option<f64> = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        let mut g = DVector::<f64>::zeros(dim);
        for (edge, &w) in graph.edges.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            let (e, jac) = edge_linearization(edge, &poses[edge.from], &poses[edge.to]);
            let jtj = jac.transpose() * jac * w;
            let jte = jac.transpose() * e * w;
            let blocks = [(slot(edge.from), 0), (slot(edge.to), 3)];
            for &(sa, oa) in &blocks {
                let Some(a) = sa else { continue };
                for r in 0..3 {
                    g[a + r] += jte[oa + r];
                }
                for &(sb, ob) in &blocks {
                    let Some(b) = sb else { continue };
                    for r in 0..3 {
                        for c in 0..3 {
                            h[(a + r, b + c)] += jtj[(oa + r, ob + c)];
                        }
                    }
                }
            }
        }
        let mean_diag = (h.trace() / dim as f64).max(1e-300);
        let mut lam = lambda.unwrap_or(options.initial_damping * mean_diag);

        let mut accepted = false;
        for _ in 0..30 {
            let mut damped = h.clone();
            for d in 0..dim {
                damped[(d, d)] += lam;
            }
            let Some(step) = envelope_cholesky_solve(&damped, &(-&g)) else {
                lam *= 10.0;
                continue;
            };
            let mut candidate = poses.clone();
            for v in 1..n {
                let o = 3 * (v - 1);
                let p = &poses[v];
                candidate[v] = Pose2::new(p.x + step[o], p.y + step[o + 1], p.theta + step[o + 2]);
            }
            let new_cost = weighted_pgo_cost(graph, &candidate, weights);
            if new_cost <= cost {
                let change = (cost - new_cost) / cost.max(1e-300);
                poses = candidate;
                cost = new_cost;
                lam = (lam / 10.0).max(1e-15 * mean_diag);
                accepted = true;
                if change < options.tolerance || cost < 1e-30 {
                    converged = true;
                }
                break;
            }
            lam *= 10.0;
        }
        lambda = Some(lam);
        if !accepted {
            // no descent direction left at any damping: stationary to precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    Ok(GaussNewtonReport { poses, cost, iterations, converged })
}

impl WeightedProblem for PoseGraph2 {
    type Estimate = Vec<Pose2>;

    fn measurement_count(&self) -> usize {
        self.edges.len()
    }

    fn solve(&self, weights: &[f64], warm_start: Option<&Vec<Pose2>>) -> Result<Vec<Pose2>> {
        let report = pgo_gauss_newton_weighted(
            self,
            weights,
            warm_start.map(|p| p.as_slice()),
            &GaussNewtonOptions::default(),
        )?;
        Ok(report.poses)
    }

    fn squared_residuals(&self, estimate: &Vec<Pose2>) -> Vec<f64> {
        residuals_pgo(self, estimate)
    }
}

/// Robust view of a pose graph in which only loop closures are reweighted.
///
/// Odometry edges are trusted and keep weight 1 in every solve; they are
/// not reweighted and do not enter the robust residual vector. Measurement
/// `k` of this problem is the `k`-th loop closure in edge order.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopClosureProblem {
    graph: PoseGraph2,
    loop_edges: Vec<usize>,
    options: GaussNewtonOptions,
}

impl LoopClosureProblem {
    pub fn new(graph: PoseGraph2) -> Result<Self> {
        graph.validate()?;
        let loop_edges = graph
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind == EdgeKind::LoopClosure)
            .map(|(k, _)| k)
            .collect();
        Ok(Self {
            graph,
            loop_edges,
            options: GaussNewtonOptions::default(),
        })
    }

    pub fn with_options(mut self, options: GaussNewtonOptions) -> Self {
        self.options = options;
        self
    }

    pub fn graph(&self) -> &PoseGraph2 {
        &self.graph
    }

    /// Edge index of each loop closure.
    pub fn loop_closure_edges(&self) -> &[usize] {
        &self.loop_edges
    }

    /// Full per-edge weights: 1 on odometry, `loop_weights` on loop closures.
    pub fn edge_weights(&self, loop_weights: &[f64]) -> Vec<f64> {
        let mut w = vec![1.0; self.graph.edges.len()];
        for (&k, &lw) in self.loop_edges.iter().zip(loop_weights) {
            w[k] = lw;
        }
        w
    }
}

impl WeightedProblem for LoopClosureProblem {
    type Estimate = Vec<Pose2>;

    fn measurement_count(&self) -> usize {
        self.loop_edges.len()
    }

    fn solve(&self, weights: &[f64], warm_start: Option<&Vec<Pose2>>) -> Result<Vec<Pose2>> {
        if weights.len() != self.loop_edges.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} loop closures",
                weights.len(),
                self.loop_edges.len()
            )));
        }
        let report = pgo_gauss_newton_weighted(
            &self.graph,
            &self.edge_weights(weights),
            warm_start.map(|p| p.as_slice()),
            &self.options,
        )?;
        Ok(report.poses)
    }

    fn squared_residuals(&self, estimate: &Vec<Pose2>) -> Vec<f64> {
        self.loop_edges
            .iter()
            .map(|&k| {
                let e = &self.graph.edges[k];
                edge_squared_residual(e, &estimate[e.from], &estimate[e.to])
            })
            .collect()
    }
}
