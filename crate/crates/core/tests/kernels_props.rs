use proptest::prelude::*;
use robust_bayes::kernels::{
    asor_iteration_update, eror_mu_update, eror_weight, esor_rho_update, esor_weight, gnc_baseline_update,
    gnc_weight, run_robust, AsorHyperParams, AsorState, GncControl, Method, RobustConfig, StopReason,
    StoppingRule,
};
use robust_bayes::registration::CorrespondenceSet;
use nalgebra::{Rotation3, Vector3};

fn log_uniform() -> impl Strategy<Value = f64> {
    (-6.0f64..6.0).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #[test]
    fn eror_weight_in_unit_interval_and_decreasing(r in 0.0f64..1e6, d in 1e-6f64..1e3, mu in log_uniform()) {
        let w = eror_weight(r, mu).unwrap();
        prop_assert!(w > 0.0 && w <= 1.0);
        prop_assert!(eror_weight(r + d, mu).unwrap() < w);
    }

    #[test]
    fn esor_weight_logistic_symmetry(rho in 1.0f64..100.0, delta in 0.0f64..1.0) {
        let up = esor_weight(rho + delta, rho).unwrap();
        let down = esor_weight(rho - delta, rho).unwrap();
        prop_assert!((up + down - 1.0).abs() < 1e-12);
    }

    #[test]
    fn esor_weight_never_nan(r in prop_oneof![0.0f64..10.0, 1e3f64..1e300], rho in log_uniform()) {
        let w = esor_weight(r, rho).unwrap();
        prop_assert!((0.0..1.0).contains(&w) || w == 1.0);
    }

    #[test]
    fn eror_scale_is_floored_midrange(rs in prop::collection::vec(0.0f64..100.0, 1..40), chi in 0.0f64..10.0) {
        let mu = eror_mu_update(&rs, chi).unwrap();
        let hi = rs.iter().copied().fold(f64::MIN, f64::max);
        let lo = rs.iter().copied().fold(f64::MAX, f64::min);
        prop_assert!(mu >= chi);
        prop_assert!(mu == chi || (mu - 0.5 * (hi + lo)).abs() < 1e-12);
    }

    #[test]
    fn esor_threshold_bounded(
        pairs in prop::collection::vec((0.01f64..1.0, 0.0f64..100.0), 1..40),
        gamma in 0.01f64..1.0,
    ) {
        let (w, r): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let rho = esor_rho_update(&w, &r, gamma).unwrap();
        let hi = r.iter().copied().fold(0.0, f64::max);
        prop_assert!(rho >= gamma);
        prop_assert!(rho <= hi.max(gamma) + 1e-9);
    }

    #[test]
    fn asor_state_stays_valid(rs in prop::collection::vec(log_uniform(), 1..60), rounds in 1usize..6) {
        let hp = AsorHyperParams::default();
        let mut state = AsorState::new(&hp);
        for _ in 0..rounds {
            let w = asor_iteration_update(&rs, &mut state, &hp).unwrap();
            prop_assert!(state.b_hat > 0.0 && state.b_hat.is_finite());
            for (i, ((&wi, &om), &beta)) in w.iter().zip(&state.omega).zip(&state.beta).enumerate() {
                let (ln_om, ln_not) = state.ln_omega(i);
                prop_assert!(state.log_odds[i].is_finite());
                prop_assert!(ln_om.is_finite() && ln_om <= 0.0 && ln_not.is_finite() && ln_not <= 0.0);
                prop_assert!((0.0..=1.0).contains(&om));
                prop_assert!(beta >= state.b_hat || (beta - state.b_hat).abs() < 1e-9 * beta);
                prop_assert!(wi.is_finite() && wi >= 0.0);
                prop_assert!(wi <= 1f64.max(hp.alpha() / state.b_hat) + 1e-12);
            }
        }
    }

    #[test]
    fn gnc_weights_in_unit_interval(r in 0.0f64..1e4, mu in log_uniform(), c in 0.01f64..10.0) {
        for method in [Method::GncGm, Method::GncTls] {
            let w = gnc_weight(method, r, mu, c).unwrap();
            prop_assert!((0.0..=1.0).contains(&w));
        }
    }
}

#[test]
fn gm_schedule_decreases_to_one() {
    let rs = [0.1, 5.0, 400.0];
    let mut control = GncControl::default();
    let mut last = f64::INFINITY;
    for _ in 0..40 {
        gnc_baseline_update(Method::GncGm, &rs, &mut control, 1.0, 1.4).unwrap();
        let mu = control.mu.unwrap();
        assert!(mu <= last && mu >= 1.0);
        last = mu;
    }
    assert_eq!(last, 1.0);
}

#[test]
fn tls_schedule_ends_binary() {
    let rs = [0.0, 0.5, 0.99, 1.01, 3.0, 1e4];
    let mut control = GncControl::default();
    let mut w = Vec::new();
    for _ in 0..200 {
        w = gnc_baseline_update(Method::GncTls, &rs, &mut control, 1.0, 1.4).unwrap();
    }
    assert_eq!(w, vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn asor_zero_residual_oracle() {
    let hp = AsorHyperParams::default();
    assert!((hp.zeta() - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-14);
    let mut state = AsorState::new(&hp);
    let w = asor_iteration_update(&[0.0], &mut state, &hp).unwrap();
    assert_eq!(state.beta[0], 10_000.0);
    assert!((state.omega[0] - 0.994_389_756_573_546_2).abs() < 1e-15);
    assert!((w[0] - 0.994_390_317_597_888_8).abs() < 1e-15);
}

fn line_cloud(outlier: bool) -> CorrespondenceSet {
    let rot = Rotation3::from_euler_angles(0.3, -0.2, 1.1).into_inner();
    let t = Vector3::new(0.4, -1.0, 2.0);
    let src: Vec<_> = (0..30)
        .map(|i| {
            let f = i as f64;
            Vector3::new((f * 0.37).sin(), (f * 0.91).cos(), (f * 0.13).sin() * 0.5)
        })
        .collect();
    let mut dst: Vec<_> = src.iter().map(|p| rot * p + t).collect();
    if outlier {
        dst[7] += Vector3::new(3.0, 1.0, -2.0);
        dst[19] += Vector3::new(-2.0, 4.0, 1.0);
    }
    CorrespondenceSet::new(src, dst, 1e4).unwrap()
}

#[test]
fn every_method_terminates_with_a_reason() {
    for rule in [StoppingRule::CostChange, StoppingRule::MaxWeightedResidual] {
        for method in Method::ALL {
            let cfg = RobustConfig {
                stopping_rule: rule,
                ..RobustConfig::with_method(method)
            };
            let out = run_robust(&line_cloud(true), &cfg, None).unwrap();
            assert!(out.trace.iteration_count() >= 1);
            assert!(out.trace.iteration_count() <= cfg.max_iterations);
            if method == Method::None {
                assert_eq!(out.trace.iteration_count(), 1);
            }
        }
    }
}

#[test]
fn robust_loop_is_deterministic() {
    for method in Method::ALL {
        let cfg = RobustConfig::with_method(method);
        let a = run_robust(&line_cloud(true), &cfg, None).unwrap();
        let b = run_robust(&line_cloud(true), &cfg, None).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.state, b.state);
        let na: Vec<_> = a.trace.iterations.iter().map(|r| r.numeric()).collect();
        let nb: Vec<_> = b.trace.iterations.iter().map(|r| r.numeric()).collect();
        assert_eq!(na, nb);
        assert_eq!(a.trace.stop_reason, b.trace.stop_reason);
    }
}

#[test]
fn weight_floor_break_is_reported() {
    let cfg = RobustConfig {
        weight_sum_floor: 1e9,
        ..RobustConfig::with_method(Method::Esor)
    };
    let out = run_robust(&line_cloud(false), &cfg, None).unwrap();
    assert_eq!(out.trace.stop_reason, StopReason::WeightSumFloor);
}
