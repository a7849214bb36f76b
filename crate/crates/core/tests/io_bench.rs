use std::path::Path;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_bayes::bench::{
    outlier_count, registration_sweep, run_benchmark, run_seed, summarize, BenchOptions, BenchSpec,
    PgoBenchConfig, RegistrationBenchConfig,
};
use robust_bayes::io::{
    downsample_and_box, parse_ply, read_g2o_2d, read_ply, read_records_csv, write_g2o_2d, write_ply,
    write_records_csv, G2oGraph2, RecordWriter,
};
use robust_bayes::kernels::Method;
use robust_bayes::Error;

fn small_registration() -> RegistrationBenchConfig {
    RegistrationBenchConfig {
        m: 40,
        outlier_ratios: vec![0.0, 0.5],
        mc_runs: 3,
        ..RegistrationBenchConfig::default()
    }
}

fn options(methods: &[Method]) -> BenchOptions {
    BenchOptions {
        methods: methods.to_vec(),
        record_timing: false,
        ..BenchOptions::default()
    }
}

#[test]
fn ply_files_roundtrip_and_feed_the_generator() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cloud.ply");
    let points: Vec<_> = (0..200)
        .map(|i| {
            let f = i as f64;
            Vector3::new(f.sin() * 4.0, (f * 0.3).cos() * 2.0, f * 0.01)
        })
        .collect();
    write_ply(&path, &points).unwrap();
    let cloud = read_ply(&path).unwrap();
    assert_eq!(cloud.points, points);
    let boxed = downsample_and_box(&cloud.points, 50, 0.5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(boxed.len(), 50);
    assert!(boxed.iter().all(|p| p.amax() <= 0.5 + 1e-12));

    let cfg = RegistrationBenchConfig {
        m: 50,
        source_cloud: Some(boxed),
        source_path: Some(path.display().to_string()),
        ..small_registration()
    };
    let out = registration_sweep(&cfg, &options(&[Method::GncTls])).unwrap();
    assert!(out.iter().all(|t| t.record.rotation_error_deg < 1.0));
}

#[test]
fn binary_ply_is_rejected_clearly() {
    let text = b"ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nend_header\n";
    let err = parse_ply(text, Path::new("b.ply")).unwrap_err();
    assert!(err.to_string().contains("ASCII"), "{err}");
}

#[test]
fn g2o_files_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PgoBenchConfig {
        n_poses: 20,
        loop_closure_count: 5,
        ..PgoBenchConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inst = robust_bayes::bench::generate_pgo_instance(&cfg, 0.4, &mut rng).unwrap();
    let g = G2oGraph2::from_graph(inst.graph);
    let path = dir.path().join("g.g2o");
    write_g2o_2d(&path, &g).unwrap();
    let back = read_g2o_2d(&path).unwrap();
    assert_eq!(back.graph, g.graph);
    assert_eq!(back.source_path.as_deref(), Some(path.as_path()));
}

#[test]
fn missing_files_report_the_path() {
    match read_ply("/definitely/not/here.ply") {
        Err(e @ Error::Io { .. }) => assert!(e.to_string().contains("here.ply")),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn records_roundtrip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let spec = BenchSpec::Registration(small_registration());
    let records = run_benchmark(&spec, &options(&[Method::None, Method::Asor]), |_| Ok(())).unwrap();
    let path = dir.path().join("r.csv");
    write_records_csv(&records, &path).unwrap();
    let back = read_records_csv(&path).unwrap();
    assert_eq!(back, records);
}

#[test]
fn streaming_sink_matches_batch_output() {
    let spec = BenchSpec::Registration(small_registration());
    let opts = options(&[Method::Esor]);
    let mut writer = RecordWriter::new(Vec::new()).unwrap();
    let records = run_benchmark(&spec, &opts, |r| writer.write(r)).unwrap();
    let streamed = writer.finish().unwrap();
    let batch = robust_bayes::io::records_to_csv_string(&records).unwrap();
    assert_eq!(String::from_utf8(streamed).unwrap(), batch);
}

#[test]
fn sweep_shape_and_seeding() {
    let cfg = small_registration();
    let out = registration_sweep(&cfg, &options(&Method::ALL)).unwrap();
    assert_eq!(out.len(), 6 * 2 * 3);
    for t in &out {
        let outliers = t.good_mask.iter().filter(|g| !**g).count();
        assert_eq!(outliers, outlier_count(t.record.outlier_ratio, cfg.m));
        assert!(!t.record.stop_reason.is_empty());
    }
    assert_ne!(run_seed(1, 0.1, 0), run_seed(1, 0.1, 1));
    assert_ne!(run_seed(1, 0.1, 0), run_seed(1, 0.2, 0));
    let rows = summarize(&out.iter().map(|t| t.record.clone()).collect::<Vec<_>>());
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.runs == 3));
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = RegistrationBenchConfig {
        outlier_ratios: vec![1.0],
        ..small_registration()
    };
    assert!(registration_sweep(&bad, &options(&[Method::Esor])).is_err());
    assert!(registration_sweep(&small_registration(), &options(&[])).is_err());
}
