use idaudit::cloud::split_by_label;
use idaudit::estimators::{diagnose_support, estimate_twonn_mle, SupportVerdict};
use idaudit::knn::{knn_distances, squared_distance};
use idaudit::synth::{
    embed_ambient, random_orthogonal, sample_finite_vocabulary, sample_uniform_ball, ManifoldKind, ManifoldSpec,
    PointCounts, SynthError,
};

#[test]
fn ball_points_lie_inside_and_fill_it() {
    let cloud = sample_uniform_ball(3, 20_000, 1).unwrap();
    let radii: Vec<f64> = cloud.rows().map(|r| squared_distance(r, &[0.0; 3]).sqrt()).collect();
    assert!(radii.iter().all(|&r| r <= 1.0));
    // P(|x| ≤ 1/2) = 1/8 for the uniform 3-ball.
    let inner = radii.iter().filter(|&&r| r <= 0.5).count() as f64 / radii.len() as f64;
    assert!((inner - 0.125).abs() < 0.01, "{inner}");
}

#[test]
fn same_seed_same_cloud() {
    assert_eq!(sample_uniform_ball(4, 100, 9).unwrap(), sample_uniform_ball(4, 100, 9).unwrap());
    assert_ne!(sample_uniform_ball(4, 100, 9).unwrap(), sample_uniform_ball(4, 100, 10).unwrap());
}

#[test]
fn rotation_is_orthogonal() {
    let q = random_orthogonal(12, 3);
    let gram = q.transpose() * &q;
    for i in 0..12 {
        for j in 0..12 {
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((gram[(i, j)] - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn ambient_embedding_preserves_distances() {
    let ball = sample_uniform_ball(3, 50, 2).unwrap();
    for rotate in [false, true] {
        let big = embed_ambient(&ball, 40, rotate, 5).unwrap();
        assert_eq!(big.dim(), 40);
        for (i, j) in [(0, 1), (4, 17), (30, 49)] {
            let a = squared_distance(ball.row(i), ball.row(j));
            let b = squared_distance(big.row(i), big.row(j));
            assert!((a - b).abs() < 1e-12);
        }
    }
    assert!(matches!(embed_ambient(&ball, 2, true, 0), Err(SynthError::AmbientTooSmall { .. })));
}

fn union(dims: Vec<usize>, offsets: Option<Vec<Vec<f64>>>) -> ManifoldSpec {
    ManifoldSpec {
        kind: ManifoldKind::UnionOfBalls,
        intrinsic_dims: dims,
        ambient_dim: 3,
        n_points: PointCounts::PerComponent(vec![3000, 3000]),
        offsets,
        rotate: false,
        seed: 4,
        vocab_size: None,
    }
}

#[test]
fn union_components_are_labelled_and_recovered() {
    let cloud = union(vec![1, 2], None).generate().unwrap();
    let parts = split_by_label(&cloud).unwrap();
    assert_eq!(parts.len(), 2);
    for ((label, part), truth) in parts.iter().zip([1.0, 2.0]) {
        assert_eq!(part.n_points(), 3000);
        let d = estimate_twonn_mle(&knn_distances(part, 2).unwrap(), 0.1).unwrap().value;
        assert!((d - truth).abs() < 0.3, "{label}: {d}");
    }
}

#[test]
fn overlapping_components_are_rejected() {
    let spec = union(vec![1, 2], Some(vec![vec![0.0; 3], vec![1.5, 0.0, 0.0]]));
    assert!(matches!(spec.generate(), Err(SynthError::OverlappingComponents { a: 0, b: 1, .. })));
}

#[test]
fn spec_json_round_trip_and_unknown_fields() {
    let json = r#"{"kind": "uniform_ball", "intrinsic_dims": [2], "ambient_dim": 5, "n_points": 100, "seed": 7}"#;
    let spec: ManifoldSpec = serde_json::from_str(json).unwrap();
    let cloud = spec.generate().unwrap();
    assert_eq!((cloud.n_points(), cloud.dim()), (100, 5));
    let again: ManifoldSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(again, spec);
    assert!(serde_json::from_str::<ManifoldSpec>(&json.replace("\"seed\"", "\"sede\"")).is_err());
}

#[test]
fn vocabulary_has_at_most_vocab_distinct_rows() {
    let cloud = sample_finite_vocabulary(10, 4, 500, 2).unwrap();
    let mut rows: Vec<Vec<u64>> = cloud.rows().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
    rows.sort();
    rows.dedup();
    assert!(rows.len() <= 10);
    let diag = diagnose_support(&knn_distances(&cloud, 1).unwrap());
    assert_eq!(diag.verdict, SupportVerdict::FiniteSupportSuspected);
}

#[test]
fn invalid_specs() {
    let mut spec = ManifoldSpec::uniform_ball(2, 10, 0);
    spec.intrinsic_dims = vec![0];
    assert!(matches!(spec.generate(), Err(SynthError::InvalidSpec(_))));
    let mut spec = ManifoldSpec::uniform_ball(4, 10, 0);
    spec.ambient_dim = 3;
    assert!(matches!(spec.generate(), Err(SynthError::AmbientTooSmall { ambient: 3, needed: 4 })));
}
