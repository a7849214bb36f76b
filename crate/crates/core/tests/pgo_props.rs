use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_bayes::bench::{generate_pgo_instance, trajectory_rmse, OdometryNoise, PgoBenchConfig, Trajectory};
use robust_bayes::kernels::{run_robust, Method, RobustConfig};
use robust_bayes::pgo::{
    edge_squared_residual, odometry_initialization, pgo_gauss_newton_weighted, weighted_pgo_cost, Edge2, EdgeKind,
    GaussNewtonOptions, LoopClosureProblem, Pose2,
};

fn config(trajectory: Trajectory, noise: f64) -> PgoBenchConfig {
    PgoBenchConfig {
        n_poses: 40,
        trajectory,
        loop_closure_count: 10,
        odometry_noise: OdometryNoise {
            trans_std: noise,
            rot_std: noise,
        },
        ..PgoBenchConfig::default()
    }
}

#[test]
fn half_turn_residual() {
    let e = Edge2 {
        from: 0,
        to: 1,
        measurement: Pose2::new(0.0, 0.0, std::f64::consts::PI),
        kappa: 1.0,
        tau: 1.0,
        kind: EdgeKind::Odometry,
    };
    let p = Pose2::new(0.0, 0.0, 0.0);
    assert!((edge_squared_residual(&e, &p, &p) - 8.0).abs() < 1e-12);
}

#[test]
fn noise_free_graphs_are_solved_exactly() {
    for trajectory in [Trajectory::Circle, Trajectory::Grid, Trajectory::Manhattan] {
        let cfg = config(trajectory, 0.0);
        let inst = generate_pgo_instance(&cfg, 0.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let w = vec![1.0; inst.graph.edges.len()];
        let rep = pgo_gauss_newton_weighted(&inst.graph, &w, None, &GaussNewtonOptions::default()).unwrap();
        assert!(trajectory_rmse(&rep.poses, &inst.ground_truth).unwrap() < 1e-8, "{trajectory:?}");
        assert!(rep.cost < 1e-12);
    }
}

#[test]
fn gauss_newton_descends_and_keeps_the_gauge() {
    for seed in 0..5 {
        let cfg = config(Trajectory::Circle, 0.02);
        let inst = generate_pgo_instance(&cfg, 0.3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let w = vec![1.0; inst.graph.edges.len()];
        let init = odometry_initialization(&inst.graph).unwrap();
        let start = weighted_pgo_cost(&inst.graph, &init, &w);
        let rep = pgo_gauss_newton_weighted(&inst.graph, &w, None, &GaussNewtonOptions::default()).unwrap();
        assert!(rep.cost <= start);
        assert_eq!(rep.poses[0], inst.graph.vertices[0]);
    }
}

#[test]
fn zero_loop_weights_give_the_odometry_chain() {
    let cfg = config(Trajectory::Circle, 0.01);
    let inst = generate_pgo_instance(&cfg, 0.5, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let chain = odometry_initialization(&inst.graph).unwrap();
    let problem = LoopClosureProblem::new(inst.graph.clone()).unwrap();
    let zero = vec![0.0; problem.loop_closure_edges().len()];
    let rep = pgo_gauss_newton_weighted(
        &inst.graph,
        &problem.edge_weights(&zero),
        None,
        &GaussNewtonOptions::default(),
    )
    .unwrap();
    for (a, b) in rep.poses.iter().zip(&chain) {
        assert!((a.translation() - b.translation()).norm() < 1e-9);
    }
}

#[test]
fn fully_corrupted_loops_leave_the_chain_nearly_intact() {
    let cfg = config(Trajectory::Circle, 0.0);
    let inst = generate_pgo_instance(&cfg, 1.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let problem = LoopClosureProblem::new(inst.graph.clone()).unwrap();
    let chain = odometry_initialization(&inst.graph).unwrap();
    let drift = |method| {
        let out = run_robust(&problem, &RobustConfig::with_method(method), None).unwrap();
        trajectory_rmse(&out.estimate, &chain).unwrap()
    };
    let plain = drift(Method::None);
    for method in [Method::Asor, Method::GncGm, Method::GncTls] {
        let d = drift(method);
        assert!(d < 0.1 * plain, "{method}: {d} vs {plain}");
    }
}

#[test]
fn robust_beats_plain_least_squares() {
    let cfg = config(Trajectory::Circle, 0.01);
    let inst = generate_pgo_instance(&cfg, 0.3, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let problem = LoopClosureProblem::new(inst.graph).unwrap();
    let plain = run_robust(&problem, &RobustConfig::with_method(Method::None), None).unwrap();
    let robust = run_robust(&problem, &RobustConfig::with_method(Method::GncTls), None).unwrap();
    let e_plain = trajectory_rmse(&plain.estimate, &inst.ground_truth).unwrap();
    let e_robust = trajectory_rmse(&robust.estimate, &inst.ground_truth).unwrap();
    assert!(e_robust < e_plain, "{e_robust} vs {e_plain}");
}
