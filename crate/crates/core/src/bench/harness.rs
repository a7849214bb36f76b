use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{PgoBenchConfig, RegistrationBenchConfig};
use super::generate::{generate_pgo_instance, generate_registration_instance};
use super::metrics::{quantile, rotation_error_deg, trajectory_errors, translation_error};
use crate::error::{Error, Result};
use crate::kernels::{run_robust, Method, RobustConfig};
use crate::pgo::LoopClosureProblem;

/// Stop reason recorded when the inner solver fails during a run.
pub const SOLVER_FAILURE: &str = "SOLVER_FAILURE";

/// One Monte-Carlo run of one method.
///
/// For registration runs `rotation_error_deg` and `translation_error` are the
/// errors of the estimated transform. For pose-graph runs they are the mean
/// heading and mean position errors after rigid alignment, and
/// `trajectory_rmse` is set. A run whose solver failed carries NaN errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: Method,
    pub outlier_ratio: f64,
    pub mc_index: usize,
    pub rotation_error_deg: f64,
    pub translation_error: f64,
    pub trajectory_rmse: Option<f64>,
    pub iterations: usize,
    pub wall_time_ms: f64,
    pub stop_reason: String,
}

impl BenchRecord {
    pub fn failed(&self) -> bool {
        self.stop_reason == SOLVER_FAILURE
    }
}

/// Knobs shared by both sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub methods: Vec<Method>,
    /// Template for every run; its `method` is overwritten.
    pub robust: RobustConfig,
    /// Worker threads. `0` uses the global rayon pool.
    pub workers: usize,
    /// Write `wall_time_ms = 0` when false, making outputs byte-reproducible.
    pub record_timing: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            robust: RobustConfig::default(),
            workers: 0,
            record_timing: true,
        }
    }
}

/// Record plus the final weights and the ground-truth labels of the instance.
#[derive(Clone, Debug)]
pub struct TrialOutput {
    pub record: BenchRecord,
    /// Empty when the run failed.
    pub weights: Vec<f64>,
    /// `true` for inliers (registration) or uncorrupted loop closures (pose graphs).
    pub good_mask: Vec<bool>,
}

impl TrialOutput {
    /// Fraction of measurements whose thresholded weight (`w > 0.5`) matches
    /// its label, or `None` if the run failed.
    pub fn classification_accuracy(&self) -> Option<f64> {
        if self.weights.len() != self.good_mask.len() || self.weights.is_empty() {
            return None;
        }
        let hits = self
            .weights
            .iter()
            .zip(&self.good_mask)
            .filter(|(w, good)| (**w > 0.5) == **good)
            .count();
        Some(hits as f64 / self.weights.len() as f64)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the run `(ratio, mc_index)`; independent of execution order.
pub fn run_seed(master: u64, ratio: f64, mc_index: usize) -> u64 {
    master ^ splitmix64(ratio.to_bits() ^ splitmix64(mc_index as u64))
}

fn elapsed_ms(start: Instant, record_timing: bool) -> f64 {
    if record_timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    }
}

/// One registration run. All methods see the same instance for a given
/// `(ratio, mc_index)`.
pub fn run_registration_trial(
    cfg: &RegistrationBenchConfig,
    options: &BenchOptions,
    method: Method,
    ratio: f64,
    mc_index: usize,
) -> Result<TrialOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(cfg.seed, ratio, mc_index));
    let inst = generate_registration_instance(cfg, ratio, &mut rng)?;
    let robust = RobustConfig {
        method,
        ..options.robust.clone()
    };
    let start = Instant::now();
    let outcome = run_robust(&inst.correspondences, &robust, None);
    let wall_time_ms = elapsed_ms(start, options.record_timing);
    let mut record = BenchRecord {
        method,
        outlier_ratio: ratio,
        mc_index,
        rotation_error_deg: f64::NAN,
        translation_error: f64::NAN,
        trajectory_rmse: None,
        iterations: 0,
        wall_time_ms,
        stop_reason: SOLVER_FAILURE.to_string(),
    };
    let weights = match outcome {
        Ok(out) => {
            let gt = &inst.ground_truth;
            record.rotation_error_deg = rotation_error_deg(&out.estimate.rotation, &gt.rotation);
            record.translation_error = translation_error(&out.estimate.translation, &gt.translation);
            record.iterations = out.trace.iteration_count();
            record.stop_reason = out.trace.stop_reason.as_str().to_string();
            out.state.weights
        }
        Err(Error::Solver { iteration, .. }) => {
            record.iterations = iteration;
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    Ok(TrialOutput {
        record,
        weights,
        good_mask: inst.inlier_mask,
    })
}

/// One pose-graph run on a graph with `fraction` of its loop closures
/// corrupted. Odometry is trusted and only loop closures are reweighted.
pub fn run_pgo_trial(
    cfg: &PgoBenchConfig,
    options: &BenchOptions,
    method: Method,
    fraction: f64,
    mc_index: usize,
) -> Result<TrialOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(cfg.seed, fraction, mc_index));
    let inst = generate_pgo_instance(cfg, fraction, &mut rng)?;
    let robust = RobustConfig {
        method,
        ..options.robust.clone()
    };
    let start = Instant::now();
    let problem = LoopClosureProblem::new(inst.graph)?;
    let outcome = run_robust(&problem, &robust, None);
    let wall_time_ms = elapsed_ms(start, options.record_timing);
    let mut record = BenchRecord {
        method,
        outlier_ratio: fraction,
        mc_index,
        rotation_error_deg: f64::NAN,
        translation_error: f64::NAN,
        trajectory_rmse: Some(f64::NAN),
        iterations: 0,
        wall_time_ms,
        stop_reason: SOLVER_FAILURE.to_string(),
    };
    let weights = match outcome {
        Ok(out) => {
            let err = trajectory_errors(&out.estimate, &inst.ground_truth)
                .ok_or_else(|| Error::invalid("estimate and ground truth differ in length"))?;
            record.rotation_error_deg = err.mean_heading_error_deg;
            record.translation_error = err.mean_position_error;
            record.trajectory_rmse = Some(err.rmse);
            record.iterations = out.trace.iteration_count();
            record.stop_reason = out.trace.stop_reason.as_str().to_string();
            out.state.weights
        }
        Err(Error::Solver { iteration, .. }) => {
            record.iterations = iteration;
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    Ok(TrialOutput {
        record,
        weights,
        good_mask: problem.loop_closure_edges().iter().map(|&k| !inst.corrupted_mask[k]).collect(),
    })
}

fn sweep<F>(ratios: &[f64], mc_runs: usize, options: &BenchOptions, trial: F) -> Result<Vec<TrialOutput>>
where
    F: Fn(Method, f64, usize) -> Result<TrialOutput> + Sync,
{
    if options.methods.is_empty() {
        return Err(Error::invalid("no methods selected"));
    }
    options.robust.validate()?;
    let tasks: Vec<(usize, f64, usize)> = (0..options.methods.len())
        .flat_map(|mi| {
            ratios
                .iter()
                .flat_map(move |&r| (0..mc_runs).map(move |mc| (mi, r, mc)))
        })
        .collect();
    let work = || -> Result<Vec<TrialOutput>> {
        tasks
            .par_iter()
            .map(|&(mi, r, mc)| trial(options.methods[mi], r, mc))
            .collect()
    };
    if options.workers == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers)
            .build()
            .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?
            .install(work)
    }
}

/// Every `(method, ratio, mc_index)` registration run, ordered by method
/// (as listed in `options`), then ratio, then run index.
pub fn registration_sweep(cfg: &RegistrationBenchConfig, options: &BenchOptions) -> Result<Vec<TrialOutput>> {
    cfg.validate()?;
    sweep(&cfg.outlier_ratios, cfg.mc_runs, options, |method, r, mc| {
        run_registration_trial(cfg, options, method, r, mc)
    })
}

/// Pose-graph counterpart of [`registration_sweep`].
pub fn pgo_sweep(cfg: &PgoBenchConfig, options: &BenchOptions) -> Result<Vec<TrialOutput>> {
    cfg.validate()?;
    sweep(&cfg.corrupted_fractions, cfg.mc_runs, options, |method, r, mc| {
        run_pgo_trial(cfg, options, method, r, mc)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BenchSpec {
    Registration(RegistrationBenchConfig),
    Pgo(PgoBenchConfig),
}

/// Run a sweep and stream each record, in order, to `sink`.
pub fn run_benchmark(
    spec: &BenchSpec,
    options: &BenchOptions,
    mut sink: impl FnMut(&BenchRecord) -> Result<()>,
) -> Result<Vec<BenchRecord>> {
    let trials = match spec {
        BenchSpec::Registration(cfg) => registration_sweep(cfg, options)?,
        BenchSpec::Pgo(cfg) => pgo_sweep(cfg, options)?,
    };
    let records: Vec<BenchRecord> = trials.into_iter().map(|t| t.record).collect();
    for r in &records {
        sink(r)?;
    }
    Ok(records)
}

/// Median and quartiles of one metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    /// NaN everywhere when no finite value is present.
    pub fn of(values: &[f64]) -> Self {
        let q = |p| quantile(values, p).unwrap_or(f64::NAN);
        Self {
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub outlier_ratio: f64,
    pub runs: usize,
    pub failures: usize,
    pub rotation_error_deg: Quartiles,
    pub translation_error: Quartiles,
    pub trajectory_rmse: Option<Quartiles>,
    pub total_iterations: usize,
}

/// Group records by `(method, ratio)` in first-seen order.
pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, u64)> = Vec::new();
    for r in records {
        let key = (r.method, r.outlier_ratio.to_bits());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(method, bits)| {
            let group: Vec<&BenchRecord> = records
                .iter()
                .filter(|r| r.method == method && r.outlier_ratio.to_bits() == bits)
                .collect();
            let col = |f: fn(&BenchRecord) -> f64| group.iter().map(|r| f(r)).collect::<Vec<_>>();
            let rmse: Vec<f64> = group.iter().filter_map(|r| r.trajectory_rmse).collect();
            SummaryRow {
                method,
                outlier_ratio: f64::from_bits(bits),
                runs: group.len(),
                failures: group.iter().filter(|r| r.failed()).count(),
                rotation_error_deg: Quartiles::of(&col(|r| r.rotation_error_deg)),
                translation_error: Quartiles::of(&col(|r| r.translation_error)),
                trajectory_rmse: (!rmse.is_empty()).then(|| Quartiles::of(&rmse)),
                total_iterations: group.iter().map(|r| r.iterations).sum(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_registration() -> RegistrationBenchConfig {
        RegistrationBenchConfig {
            m: 30,
            outlier_ratios: vec![0.0, 0.3, 0.5],
            mc_runs: 20,
            ..Default::default()
        }
    }

    #[test]
    fn cardinality_and_order() {
        let options = BenchOptions {
            methods: vec![Method::Esor, Method::None],
            record_timing: false,
            ..Default::default()
        };
        let records = run_benchmark(&BenchSpec::Registration(small_registration()), &options, |_| Ok(())).unwrap();
        assert_eq!(records.len(), 120);
        assert!(records[..60].iter().all(|r| r.method == Method::Esor));
        assert_eq!(records[20].outlier_ratio, 0.3);
        assert_eq!(records[21].mc_index, 1);
        assert!(records.iter().all(|r| r.wall_time_ms == 0.0));
    }

    #[test]
    fn worker_count_does_not_change_records() {
        let cfg = small_registration();
        let mk = |workers| BenchOptions {
            methods: vec![Method::Asor, Method::GncTls],
            workers,
            record_timing: false,
            ..Default::default()
        };
        let one = run_benchmark(&BenchSpec::Registration(cfg.clone()), &mk(1), |_| Ok(())).unwrap();
        let three = run_benchmark(&BenchSpec::Registration(cfg), &mk(3), |_| Ok(())).unwrap();
        assert_eq!(one, three);
    }

    #[test]
    fn seeds_differ_per_run() {
        let a = run_seed(1, 0.5, 0);
        assert_ne!(a, run_seed(1, 0.5, 1));
        assert_ne!(a, run_seed(1, 0.4, 0));
        assert_ne!(a, run_seed(2, 0.5, 0));
        assert_eq!(a, run_seed(1, 0.5, 0));
    }

    #[test]
    fn none_is_brittle_where_esor_is_not() {
        let cfg = small_registration();
        let options = BenchOptions::default();
        let err = |m| {
            let v: Vec<f64> = (0..5)
                .map(|mc| run_registration_trial(&cfg, &options, m, 0.5, mc).unwrap().record.rotation_error_deg)
                .collect();
            quantile(&v, 0.5).unwrap()
        };
        assert!(err(Method::None) > 10.0 * err(Method::Esor));
    }

    #[test]
    fn summary_groups() {
        let rec = |method, ratio, e| BenchRecord {
            method,
            outlier_ratio: ratio,
            mc_index: 0,
            rotation_error_deg: e,
            translation_error: e,
            trajectory_rmse: None,
            iterations: 2,
            wall_time_ms: 0.0,
            stop_reason: "CONVERGED".into(),
        };
        let mut records = vec![rec(Method::Eror, 0.1, 1.0), rec(Method::Eror, 0.1, 3.0), rec(Method::Esor, 0.1, 5.0)];
        records[1].stop_reason = SOLVER_FAILURE.into();
        let rows = summarize(&records);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].rotation_error_deg.median, 2.0);
        assert_eq!(rows[0].failures, 1);
        assert_eq!(rows[0].total_iterations, 4);
        assert_eq!(rows[1].method, Method::Esor);
    }
}
