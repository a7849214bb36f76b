//! A reduced registration sweep printed as a median table, with the records
//! written to CSV.

use robust_bayes::bench::{run_benchmark, summarize, BenchOptions, BenchSpec, RegistrationBenchConfig};
use robust_bayes::io::write_records_csv;
use robust_bayes::kernels::{RobustConfig, StoppingRule};

fn main() -> robust_bayes::Result<()> {
    let cfg = RegistrationBenchConfig {
        outlier_ratios: vec![0.0, 0.3, 0.6, 0.8],
        mc_runs: 10,
        ..Default::default()
    };
    for rule in [StoppingRule::CostChange, StoppingRule::MaxWeightedResidual] {
        let options = BenchOptions {
            robust: RobustConfig {
                stopping_rule: rule,
                ..Default::default()
            },
            record_timing: false,
            ..Default::default()
        };
        let records = run_benchmark(&BenchSpec::Registration(cfg.clone()), &options, |_| Ok(()))?;
        println!("stopping rule {rule:?}");
        println!("{:<8} {:>6} {:>10} {:>10} {:>10} {:>7}", "method", "ratio", "q1", "median", "q3", "iters");
        for row in summarize(&records) {
            let q = row.rotation_error_deg;
            println!(
                "{:<8} {:>6.2} {:>10.4} {:>10.4} {:>10.4} {:>7}",
                row.method.name(),
                row.outlier_ratio,
                q.q1,
                q.median,
                q.q3,
                row.total_iterations
            );
        }
        let path = std::env::temp_dir().join(format!("robust_bayes_sweep_{rule:?}.csv"));
        write_records_csv(&records, &path)?;
        println!("records: {}\n", path.display());
    }
    Ok(())
}
