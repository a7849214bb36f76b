//! Optimize a synthetic circular pose graph whose loop closures are partly
//! corrupted. Odometry is trusted; only loop closures are reweighted.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_bayes::bench::{generate_pgo_instance, trajectory_rmse, PgoBenchConfig};
use robust_bayes::kernels::{run_robust, Method, RobustConfig};
use robust_bayes::pgo::LoopClosureProblem;

fn main() -> robust_bayes::Result<()> {
    let fraction: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.3);
    let cfg = PgoBenchConfig::default();
    let inst = generate_pgo_instance(&cfg, fraction, &mut ChaCha8Rng::seed_from_u64(3))?;
    let corrupted = inst.corrupted_mask.iter().filter(|c| **c).count();
    let problem = LoopClosureProblem::new(inst.graph)?;
    println!(
        "{} poses, {} loop closures, {corrupted} corrupted",
        problem.graph().vertices.len(),
        problem.loop_closure_edges().len()
    );
    println!(
        "odometry only: rmse {:.4}",
        trajectory_rmse(&problem.graph().vertices, &inst.ground_truth).unwrap()
    );

    for method in [Method::None, Method::Esor, Method::Asor, Method::GncTls] {
        let out = run_robust(&problem, &RobustConfig::with_method(method), None)?;
        let rejected: Vec<usize> = problem
            .loop_closure_edges()
            .iter()
            .zip(&out.state.weights)
            .filter(|(_, w)| **w < 0.5)
            .map(|(k, _)| *k)
            .collect();
        let wrong = rejected.iter().filter(|&&k| !inst.corrupted_mask[k]).count();
        println!(
            "{:<8} rmse {:>8.4}  iters {:>4}  rejected {:>2} ({wrong} of them good)",
            method.name(),
            trajectory_rmse(&out.estimate, &inst.ground_truth).unwrap(),
            out.trace.iteration_count(),
            rejected.len(),
        );
    }
    Ok(())
}
