//! Round-trip the file formats: write a PLY cloud and a g2o graph, read them
//! back, register the cloud against itself under a synthetic motion and
//! optimize the graph.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_bayes::bench::{
    generate_pgo_instance, generate_registration_instance, rotation_error_deg, PgoBenchConfig, RegistrationBenchConfig,
};
use robust_bayes::io::{read_g2o_2d, read_ply, write_g2o_2d, write_ply, G2oGraph2};
use robust_bayes::kernels::{run_robust, Method, RobustConfig};
use robust_bayes::pgo::LoopClosureProblem;

fn main() -> robust_bayes::Result<()> {
    let dir = std::env::temp_dir().join("robust_bayes_files");
    std::fs::create_dir_all(&dir).map_err(|e| robust_bayes::Error::Io { path: dir.clone(), source: e })?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    // a dense "scan" that the benchmark downsamples into the unit box
    let scan: Vec<_> = (0..2000)
        .map(|i| {
            let t = i as f64 * 0.01;
            nalgebra::Vector3::new(3.0 * t.cos(), 2.0 * t.sin(), 0.3 * t)
        })
        .collect();
    let ply = dir.join("scan.ply");
    write_ply(&ply, &scan)?;
    let cloud = read_ply(&ply)?;
    println!("{}: {} points", ply.display(), cloud.points.len());

    let cfg = RegistrationBenchConfig {
        source_cloud: Some(cloud.points),
        source_path: Some(ply.display().to_string()),
        ..Default::default()
    };
    let inst = generate_registration_instance(&cfg, 0.4, &mut rng)?;
    let out = run_robust(&inst.correspondences, &RobustConfig::with_method(Method::Asor), None)?;
    println!(
        "ASOR on the downsampled scan: rotation error {:.4} deg",
        rotation_error_deg(&out.estimate.rotation, &inst.ground_truth.rotation)
    );

    let pgo = generate_pgo_instance(&PgoBenchConfig::default(), 0.2, &mut rng)?;
    let g2o = dir.join("circle.g2o");
    write_g2o_2d(&g2o, &G2oGraph2::from_graph(pgo.graph))?;
    let graph = read_g2o_2d(&g2o)?;
    println!(
        "{}: {} vertices, {} edges, {} skipped records",
        g2o.display(),
        graph.graph.vertices.len(),
        graph.graph.edges.len(),
        graph.skipped_records
    );
    let problem = LoopClosureProblem::new(graph.graph)?;
    let out = run_robust(&problem, &RobustConfig::with_method(Method::GncTls), None)?;
    let kept = out.state.weights.iter().filter(|w| **w > 0.5).count();
    println!("GNC-TLS kept {kept} of {} loop closures", out.state.weights.len());
    Ok(())
}
