use idaudit::cloud::LayerStack;
use idaudit::estimators::EstimatorConfig;
use idaudit::knn::squared_distance;
use idaudit::lipschitz::{
    audit_monotonicity, build_random_net, find_violations, max_lipschitz_excess, pushforward, random_net_spec,
    spectral_norm, AuditConfig, LayerSpec, LinearInit, LipschitzLayer, LipschitzNetwork, NetworkSpec,
};
use idaudit::rng::seeded;
use idaudit::synth::sample_uniform_ball;
use nalgebra::{DMatrix, DVector};

#[test]
fn power_iteration_bounds_the_largest_singular_value() {
    let w = DMatrix::from_fn(7, 5, |i, j| ((i * 5 + j) as f64).sin());
    let sigma_max = w.singular_values().max();
    let estimate = spectral_norm(&w, &mut seeded(1));
    assert!(estimate >= sigma_max * (1.0 - 1e-6));
    assert!(estimate <= sigma_max * 1.001);
}

#[test]
fn certified_bound_holds_on_sampled_pairs() {
    for seed in 0..5 {
        let net = build_random_net(&random_net_spec(2, 16, 5, false, seed)).unwrap();
        let cloud = sample_uniform_ball(2, 2000, seed).unwrap();
        let stack = pushforward(&net, &cloud).unwrap();
        let out = &stack.layers().last().unwrap().cloud;
        assert!(max_lipschitz_excess(&cloud, out, net.lipschitz_bound(), 10_000, seed) <= 1e-6);
    }
}

#[test]
fn each_layer_respects_its_own_bound() {
    let net = build_random_net(&random_net_spec(3, 8, 6, false, 11)).unwrap();
    let cloud = sample_uniform_ball(3, 500, 2).unwrap();
    let stack = pushforward(&net, &cloud).unwrap();
    for (l, layer) in net.layers().iter().enumerate() {
        let (a, b) = (&stack.layers()[l].cloud, &stack.layers()[l + 1].cloud);
        for i in 0..100 {
            let j = (i * 7 + 3) % 500;
            let din = squared_distance(a.row(i), a.row(j)).sqrt();
            let dout = squared_distance(b.row(i), b.row(j)).sqrt();
            assert!(dout <= layer.lipschitz_bound * din + 1e-12, "layer {l}");
        }
    }
}

#[test]
fn stack_naming_and_depths() {
    let spec = NetworkSpec {
        input_dim: 2,
        seed: 0,
        layers: vec![
            LayerSpec::Linear { out: 4, init: LinearInit::Gaussian, gain: 1.0, bias: true },
            LayerSpec::Relu,
            LayerSpec::RmsNorm { scale: 1.0, eps: 1e-5 },
        ],
    };
    let stack = pushforward(&build_random_net(&spec).unwrap(), &sample_uniform_ball(2, 10, 0).unwrap()).unwrap();
    let names: Vec<&str> = stack.layers().iter().map(|l| l.name.as_str()).collect();
    assert_eq!(names, ["input", "1:linear", "2:relu", "3:rms_norm"]);
    let depths: Vec<f64> = stack.layers().iter().map(|l| l.relative_depth).collect();
    assert_eq!(depths, [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
}

#[test]
fn identity_network_passes_audit() {
    let layers = (0..3)
        .map(|_| LipschitzLayer::linear(DMatrix::identity(2, 2), DVector::zeros(2), &mut seeded(0)).unwrap())
        .collect();
    let net = LipschitzNetwork::new(2, layers).unwrap();
    let stack = pushforward(&net, &sample_uniform_ball(2, 2000, 5).unwrap()).unwrap();
    let report = audit_monotonicity(&stack, &AuditConfig::default(), Some(net.lipschitz_bound())).unwrap();
    assert!(report.passed());
    assert!(!report.oracle_violation);
    assert!(report.per_layer.windows(2).all(|w| w[0].estimate == w[1].estimate));
}

#[test]
fn increasing_stack_is_flagged() {
    // A 1-dimensional segment followed by a 2-dimensional disk.
    let line = sample_uniform_ball(1, 1500, 1).unwrap();
    let padded: Vec<[f64; 2]> = line.rows().map(|r| [r[0], 0.0]).collect();
    let stack = LayerStack::from_clouds(
        "rising",
        vec![
            idaudit::PointCloud::from_rows(&padded).unwrap(),
            sample_uniform_ball(2, 1500, 2).unwrap(),
        ],
    )
    .unwrap();
    let config = AuditConfig { estimator: EstimatorConfig::twonn(), tolerance: 0.1, ..AuditConfig::default() };
    let report = audit_monotonicity(&stack, &config, None).unwrap();
    assert!(!report.passed());
    assert_eq!(report.violations.len(), 1);
    assert_eq!(report.violations[0].layer, 1);
    assert!(report.violations[0].increase > 0.5);
}

#[test]
fn violation_detection() {
    let v = find_violations(&[3.0, 2.0, 2.4, 2.3, 2.35], 0.1);
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].layer, 2);
}
