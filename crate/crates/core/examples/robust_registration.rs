//! Register a synthetic point cloud with half of its correspondences
//! replaced by outliers, once per method.
//!
//! ```text
//! cargo run --example robust_registration -- 0.6
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_bayes::bench::{generate_registration_instance, rotation_error_deg, translation_error, RegistrationBenchConfig};
use robust_bayes::kernels::{run_robust, Method, RobustConfig};

fn main() -> robust_bayes::Result<()> {
    let ratio: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let cfg = RegistrationBenchConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let inst = generate_registration_instance(&cfg, ratio, &mut rng)?;
    let truth = inst.ground_truth;

    println!("{} correspondences, outlier ratio {ratio}", inst.correspondences.len());
    println!("{:<8} {:>12} {:>12} {:>6} {:>10}", "method", "rot err deg", "trans err", "iters", "accuracy");
    for method in Method::ALL {
        let out = run_robust(&inst.correspondences, &RobustConfig::with_method(method), None)?;
        let correct = out
            .state
            .weights
            .iter()
            .zip(&inst.inlier_mask)
            .filter(|(w, inlier)| (**w > 0.5) == **inlier)
            .count();
        println!(
            "{:<8} {:>12.5} {:>12.2e} {:>6} {:>10.3}",
            method.name(),
            rotation_error_deg(&out.estimate.rotation, &truth.rotation),
            translation_error(&out.estimate.translation, &truth.translation),
            out.trace.iteration_count(),
            correct as f64 / inst.inlier_mask.len() as f64,
        );
    }
    Ok(())
}
