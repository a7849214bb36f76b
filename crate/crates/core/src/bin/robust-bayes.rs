use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use robust_bayes::bench::{
    generate_pgo_instance, generate_registration_instance, rotation_error_deg, run_benchmark, summarize,
    trajectory_rmse, translation_error, BenchOptions, BenchSpec, OdometryNoise, PgoBenchConfig,
    RegistrationBenchConfig, Trajectory, DEFAULT_BOUND_SIGMAS, DEFAULT_SEED,
};
use robust_bayes::io::{
    read_g2o_2d, read_ply, write_g2o_2d, write_manifest_json, G2oGraph2, RecordWriter, RunManifest,
};
use robust_bayes::kernels::{run_robust, AsorHyperParams, Method, RobustConfig, StoppingRule};
use robust_bayes::pgo::{LoopClosureProblem, Pose2};
use robust_bayes::registration::{residuals_registration, CorrespondenceSet, RigidTransform3};
use robust_bayes::Error;

/// Outlier-robust registration and pose-graph optimization by Bayesian reweighting.
#[derive(Parser, Debug)]
#[command(name = "robust-bayes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Register two point clouds (or a synthetic instance) robustly.
    Register(RegisterArgs),
    /// Optimize a 2D pose graph with robust loop closures.
    Pgo(PgoArgs),
    /// Run a seeded Monte-Carlo sweep and write records.csv and manifest.json.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
struct RobustArgs {
    /// Inlier bound c^2 on the (normalized) squared residual. Also the EROR
    /// floor chi, the ESOR floor gamma and the GNC threshold.
    #[arg(long)]
    inlier_threshold_sq: Option<f64>,
    #[arg(long, default_value_t = 1e-5)]
    convergence_tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iterations: usize,
    /// cost-change or max-weighted-residual.
    #[arg(long, default_value = "cost-change")]
    stopping_rule: StoppingRule,
    #[arg(long, default_value_t = 1e-8)]
    weight_sum_floor: f64,
    #[arg(long, default_value_t = 1.4)]
    gnc_factor: f64,
    #[arg(long, default_value_t = 0.5)]
    asor_a: f64,
    #[arg(long, default_value_t = 1e4)]
    asor_prior_shape: f64,
    #[arg(long, default_value_t = 1e3)]
    asor_prior_rate: f64,
    #[arg(long, default_value_t = 1e4)]
    asor_b_init: f64,
    #[arg(long, default_value_t = 0.5)]
    asor_theta: f64,
}

impl RobustArgs {
    fn config(&self, method: Method, default_threshold: f64) -> RobustConfig {
        RobustConfig {
            method,
            inlier_threshold_sq: self.inlier_threshold_sq.unwrap_or(default_threshold),
            asor: AsorHyperParams {
                a: self.asor_a,
                prior_shape: self.asor_prior_shape,
                prior_rate: self.asor_prior_rate,
                b_init: self.asor_b_init,
                theta: self.asor_theta,
            },
            convergence_tol: self.convergence_tol,
            max_iterations: self.max_iterations,
            stopping_rule: self.stopping_rule,
            weight_sum_floor: self.weight_sum_floor,
            gnc_factor: self.gnc_factor,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct RegistrationArgs {
    /// Number of correspondences.
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 0.5)]
    box_half_width: f64,
    #[arg(long, default_value_t = 3.0)]
    max_translation_norm: f64,
    #[arg(long, default_value_t = 0.001)]
    noise_std: f64,
    #[arg(long, default_value_t = 3f64.sqrt())]
    outlier_sphere_diameter: f64,
    /// Largest inlier error; residuals are divided by its square.
    /// Defaults to 5 noise standard deviations.
    #[arg(long)]
    inlier_bound: Option<f64>,
}

impl RegistrationArgs {
    fn config(&self, seed: u64) -> RegistrationBenchConfig {
        RegistrationBenchConfig {
            m: self.m,
            box_half_width: self.box_half_width,
            max_translation_norm: self.max_translation_norm,
            inlier_noise_std: self.noise_std,
            outlier_sphere_diameter: self.outlier_sphere_diameter,
            seed,
            inlier_bound: self.inlier_bound.unwrap_or(DEFAULT_BOUND_SIGMAS * self.noise_std),
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TrajectoryArg {
    Circle,
    Grid,
    Manhattan,
}

#[derive(Args, Debug, Clone)]
struct PgoGenArgs {
    #[arg(long, default_value_t = 100)]
    n_poses: usize,
    #[arg(long, value_enum, default_value = "circle")]
    trajectory: TrajectoryArg,
    #[arg(long, default_value_t = 0.01)]
    trans_std: f64,
    /// Degrees.
    #[arg(long, default_value_t = 0.5)]
    rot_std_deg: f64,
    #[arg(long, default_value_t = 30)]
    loop_closures: usize,
    #[arg(long, default_value_t = 5.0)]
    loop_closure_radius: f64,
    #[arg(long, default_value_t = 10.0)]
    corruption_extent: f64,
}

impl PgoGenArgs {
    fn config(&self, seed: u64) -> PgoBenchConfig {
        let noise = OdometryNoise {
            trans_std: self.trans_std,
            rot_std: self.rot_std_deg.to_radians(),
        };
        let (kappa, tau) = PgoBenchConfig::information_for(&noise, DEFAULT_BOUND_SIGMAS);
        PgoBenchConfig {
            n_poses: self.n_poses,
            trajectory: match self.trajectory {
                TrajectoryArg::Circle => Trajectory::Circle,
                TrajectoryArg::Grid => Trajectory::Grid,
                TrajectoryArg::Manhattan => Trajectory::Manhattan,
            },
            odometry_noise: noise,
            loop_closure_count: self.loop_closures,
            kappa,
            tau,
            seed,
            loop_closure_radius: self.loop_closure_radius,
            corruption_extent: self.corruption_extent,
            ..Default::default()
        }
    }
}

#[derive(Args, Debug)]
struct RegisterArgs {
    /// Source cloud (ASCII PLY).
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Target cloud matched to --input by index. Without it a synthetic
    /// motion and outliers are applied to the source cloud.
    #[arg(long, requires = "input")]
    target: Option<PathBuf>,
    /// Draw the source cloud uniformly in the box.
    #[arg(long)]
    synthetic: bool,
    #[arg(long, default_value_t = 0.0)]
    outlier_ratio: f64,
    #[arg(long, default_value = "esor")]
    method: Method,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[command(flatten)]
    instance: RegistrationArgs,
    #[command(flatten)]
    robust: RobustArgs,
}

#[derive(Args, Debug)]
struct PgoArgs {
    /// 2D g2o file (VERTEX_SE2 / EDGE_SE2).
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Generate a synthetic graph.
    #[arg(long)]
    synthetic: bool,
    /// Fraction of loop closures replaced by random poses (synthetic only).
    #[arg(long, default_value_t = 0.0)]
    corrupted_fraction: f64,
    #[arg(long, default_value = "esor")]
    method: Method,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[command(flatten)]
    graph: PgoGenArgs,
    #[command(flatten)]
    robust: RobustArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum Problem {
    Registration,
    Pgo,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "registration")]
    problem: Problem,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "none,eror,esor,asor,gnc-gm,gnc-tls")]
    methods: Vec<Method>,
    /// Comma-separated outlier ratios (registration) or corrupted loop
    /// closure fractions (pgo). Defaults to 0.0..0.9 and 0.0..0.8.
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    /// Monte-Carlo runs per ratio. Defaults to 20 (registration) or 10 (pgo).
    #[arg(long)]
    mc_runs: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Record wall_ms as 0 so reruns give identical CSV bytes.
    #[arg(long)]
    no_timing: bool,
    /// Source cloud for registration instances (ASCII PLY).
    #[arg(long)]
    source_ply: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[command(flatten)]
    registration: RegistrationArgs,
    #[command(flatten)]
    graph: PgoGenArgs,
    #[command(flatten)]
    robust: RobustArgs,
}

fn usage_error(msg: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::ValueValidation, msg).exit()
}

fn check<T>(r: robust_bayes::Result<T>) -> T {
    r.unwrap_or_else(|e| usage_error(e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Register(args) => cmd_register(args),
        Command::Pgo(args) => cmd_pgo(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn prepare_out_dir(dir: &Path) -> robust_bayes::Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> robust_bayes::Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

#[derive(Serialize)]
struct TransformReport {
    method: Method,
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
    iterations: usize,
    stop_reason: &'static str,
    ground_truth: Option<GroundTruthReport>,
}

#[derive(Serialize)]
struct GroundTruthReport {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
    rotation_error_deg: f64,
    translation_error: f64,
}

fn rows(t: &RigidTransform3) -> ([[f64; 3]; 3], [f64; 3]) {
    let r = &t.rotation;
    let rot = [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]);
    (rot, [t.translation.x, t.translation.y, t.translation.z])
}

fn cmd_register(args: RegisterArgs) -> robust_bayes::Result<()> {
    let mut cfg = args.instance.config(args.seed);
    let robust = args.robust.config(args.method, 1.0);
    check(robust.validate());

    let (corr, truth, labels) = match (&args.input, &args.target) {
        (Some(src), Some(dst)) => {
            let p = read_ply(src)?.points;
            let q = read_ply(dst)?.points;
            let precision = cfg.precision();
            (CorrespondenceSet::new(p, q, precision)?, None, None)
        }
        (input, _) => {
            if let Some(path) = input {
                let cloud = read_ply(path)?;
                cfg.source_path = Some(path.display().to_string());
                cfg.source_cloud = Some(cloud.points);
            }
            let probe = RegistrationBenchConfig {
                outlier_ratios: vec![args.outlier_ratio],
                source_cloud: None,
                ..cfg.clone()
            };
            check(probe.validate());
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let inst = generate_registration_instance(&cfg, args.outlier_ratio, &mut rng)?;
            (inst.correspondences, Some(inst.ground_truth), Some(inst.inlier_mask))
        }
    };

    prepare_out_dir(&args.out_dir)?;
    let out = run_robust(&corr, &robust, None)?;
    let est = out.estimate;
    let residuals = residuals_registration(&corr, &est);

    let mut weights_csv = String::from("index,weight,residual_sq,inlier\n");
    for (i, (w, r)) in out.state.weights.iter().zip(&residuals).enumerate() {
        let label = labels.as_ref().map(|l| l[i].to_string()).unwrap_or_default();
        weights_csv.push_str(&format!("{i},{w:.16e},{r:.16e},{label}\n"));
    }
    write_text(&args.out_dir.join("weights.csv"), &weights_csv)?;

    let (rotation, translation) = rows(&est);
    let ground_truth = truth.map(|gt| {
        let (r, t) = rows(&gt);
        GroundTruthReport {
            rotation: r,
            translation: t,
            rotation_error_deg: rotation_error_deg(&est.rotation, &gt.rotation),
            translation_error: translation_error(&est.translation, &gt.translation),
        }
    });
    let report = TransformReport {
        method: args.method,
        rotation,
        translation,
        iterations: out.trace.iteration_count(),
        stop_reason: out.trace.stop_reason.as_str(),
        ground_truth,
    };
    write_text(
        &args.out_dir.join("transform.json"),
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;

    println!("method      {}", args.method);
    println!("rotation    {:?}", report.rotation);
    println!("translation {:?}", report.translation);
    println!("iterations  {} ({})", report.iterations, report.stop_reason);
    if let Some(gt) = &report.ground_truth {
        println!("rotation error    {:.6} deg", gt.rotation_error_deg);
        println!("translation error {:.6e}", gt.translation_error);
    }
    Ok(())
}

fn cmd_pgo(args: PgoArgs) -> robust_bayes::Result<()> {
    let robust_default;
    let (graph_file, truth): (G2oGraph2, Option<Vec<Pose2>>) = match &args.input {
        Some(path) => {
            let g = read_g2o_2d(path)?;
            if g.skipped_records > 0 {
                eprintln!("warning: skipped {} unsupported records", g.skipped_records);
            }
            robust_default = DEFAULT_BOUND_SIGMAS * DEFAULT_BOUND_SIGMAS;
            (g, None)
        }
        None => {
            let cfg = args.graph.config(args.seed);
            check(cfg.validate());
            if !(0.0..=1.0).contains(&args.corrupted_fraction) {
                usage_error("--corrupted-fraction must lie in [0, 1]");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let inst = generate_pgo_instance(&cfg, args.corrupted_fraction, &mut rng)?;
            robust_default = 1.0;
            (G2oGraph2::from_graph(inst.graph), Some(inst.ground_truth))
        }
    };
    let robust = args.robust.config(args.method, robust_default);
    check(robust.validate());

    prepare_out_dir(&args.out_dir)?;
    let problem = LoopClosureProblem::new(graph_file.graph.clone())?;
    let (poses, iterations, stop) = if problem.loop_closure_edges().is_empty() {
        let init = robust_bayes::pgo::odometry_initialization(problem.graph())?;
        (init, 0, "NO_LOOP_CLOSURES")
    } else {
        let out = run_robust(&problem, &robust, None)?;
        (out.estimate, out.trace.iteration_count(), out.trace.stop_reason.as_str())
    };

    let mut optimized = graph_file.clone();
    optimized.graph.vertices = poses.clone();
    write_g2o_2d(args.out_dir.join("optimized.g2o"), &optimized)?;
    let mut traj = String::from("index,x,y,theta\n");
    for (i, p) in poses.iter().enumerate() {
        traj.push_str(&format!("{i},{:.16e},{:.16e},{:.16e}\n", p.x, p.y, p.theta));
    }
    write_text(&args.out_dir.join("trajectory.csv"), &traj)?;

    println!("method      {}", args.method);
    println!("poses       {}", poses.len());
    println!(
        "edges       {} ({} loop closures)",
        graph_file.graph.edges.len(),
        problem.loop_closure_edges().len()
    );
    println!("iterations  {iterations} ({stop})");
    if let Some(truth) = truth {
        let rmse = trajectory_rmse(&poses, &truth).unwrap_or(f64::NAN);
        println!("trajectory rmse {rmse:.6}");
    }
    Ok(())
}

#[derive(Serialize)]
struct BenchManifestConfig {
    problem: Problem,
    bench: BenchSpec,
    options: BenchOptions,
    /// Order of preprocessing applied to a loaded source cloud.
    source_preprocessing: Option<&'static str>,
}

fn cmd_bench(args: BenchArgs) -> robust_bayes::Result<()> {
    if args.methods.is_empty() {
        usage_error("--methods must name at least one method");
    }
    let spec = match args.problem {
        Problem::Registration => {
            let mut cfg = args.registration.config(args.seed);
            if let Some(r) = &args.ratios {
                cfg.outlier_ratios = r.clone();
            }
            if let Some(n) = args.mc_runs {
                cfg.mc_runs = n;
            }
            check(cfg.validate());
            if let Some(path) = &args.source_ply {
                let cloud = read_ply(path)?;
                cfg.source_path = Some(path.display().to_string());
                cfg.source_cloud = Some(cloud.points);
                check(cfg.validate());
            }
            BenchSpec::Registration(cfg)
        }
        Problem::Pgo => {
            let mut cfg = args.graph.config(args.seed);
            if let Some(r) = &args.ratios {
                cfg.corrupted_fractions = r.clone();
            }
            if let Some(n) = args.mc_runs {
                cfg.mc_runs = n;
            }
            check(cfg.validate());
            BenchSpec::Pgo(cfg)
        }
    };
    let options = BenchOptions {
        methods: args.methods.clone(),
        robust: args.robust.config(Method::None, 1.0),
        workers: args.workers,
        record_timing: !args.no_timing,
    };
    check(options.robust.validate());

    prepare_out_dir(&args.out_dir)?;
    let csv_path = args.out_dir.join("records.csv");
    let file = fs::File::create(&csv_path).map_err(|e| Error::Io {
        path: csv_path.clone(),
        source: e,
    })?;
    let mut writer = RecordWriter::new(std::io::BufWriter::new(file))?;
    let records = run_benchmark(&spec, &options, |r| writer.write(r))?;
    writer.finish()?;

    let source_preprocessing = args
        .source_ply
        .as_ref()
        .map(|_| "random subsample without replacement, then uniform rescale into the box");
    let manifest = RunManifest::new(
        "bench",
        args.seed,
        BenchManifestConfig {
            problem: args.problem,
            bench: spec,
            options,
            source_preprocessing,
        },
    );
    write_manifest_json(&manifest, args.out_dir.join("manifest.json"))?;

    let pgo = matches!(args.problem, Problem::Pgo);
    println!(
        "{:<8} {:>6} {:>12} {:>12} {:>12} {:>6} {:>6}",
        "method",
        "ratio",
        "rot_deg",
        "trans",
        if pgo { "traj_rmse" } else { "" },
        "iters",
        "fail"
    );
    for row in summarize(&records) {
        let rmse = row
            .trajectory_rmse
            .map(|q| format!("{:.5}", q.median))
            .unwrap_or_default();
        println!(
            "{:<8} {:>6.2} {:>12.5} {:>12.6} {:>12} {:>6} {:>6}",
            row.method.name(),
            row.outlier_ratio,
            row.rotation_error_deg.median,
            row.translation_error.median,
            rmse,
            row.total_iterations,
            row.failures
        );
    }
    println!("wrote {} records to {}", records.len(), csv_path.display());
    Ok(())
}
