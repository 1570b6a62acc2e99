use park_core::learners::*;
use park_core::screening::AggregatorWeights;
use park_core::FeatureVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_auc(scores: &[f64], labels: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1.0 && labels[j] != 1.0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    total += 1.0;
                } else if scores[i] == scores[j] {
                    total += 0.5;
                }
            }
        }
    }
    total / pairs
}

/// Walks a tree from its serialized form only.
fn naive_predict(model: &GbdtModel, x: &[f64]) -> f64 {
    let json = serde_json::to_value(model).unwrap();
    let mut margin = json["base_score"].as_f64().unwrap();
    for tree in json["trees"].as_array().unwrap() {
        let nodes = tree["nodes"].as_array().unwrap();
        let mut node = &nodes[0];
        while node["type"] == "split" {
            let f = node["feature"].as_u64().unwrap() as usize;
            let goes_left = x[f] < node["threshold"].as_f64().unwrap();
            let next = if goes_left { &node["left"] } else { &node["right"] };
            node = &nodes[next.as_u64().unwrap() as usize];
        }
        margin += node["value"].as_f64().unwrap();
    }
    if json["objective"] == "logistic" {
        1.0 / (1.0 + (-margin).exp())
    } else {
        margin
    }
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize, task: TaskType) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let mut labels: Vec<f64> = rows
        .iter()
        .map(|r| match task {
            TaskType::BinaryClass => (r[0] + 0.5 * r[d - 1] + rng.random_range(-0.5..0.5) > 0.0) as u8 as f64,
            TaskType::Regression => r[0] * r[0] - r[d - 1] + 0.1 * rng.random::<f64>(),
        })
        .collect();
    if task == TaskType::BinaryClass {
        labels[0] = 1.0;
        labels[1] = 0.0;
    }
    let names = (0..d).map(|i| format!("x{i}")).collect();
    Dataset::new("fixture.v1", names, rows, labels, task).unwrap()
}

#[test]
fn auc_matches_pair_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let n = rng.random_range(2..=200);
        let levels = rng.random_range(1..20);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / 7.0).collect();
        let mut labels: Vec<f64> = (0..n).map(|_| rng.random_range(0..2) as f64).collect();
        labels[0] = 1.0;
        labels[1] = 0.0;
        assert_eq!(auc(&scores, &labels).unwrap(), brute_auc(&scores, &labels));
    }
}

#[test]
fn gbdt_matches_naive_walk() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for task in [TaskType::Regression, TaskType::BinaryClass] {
        let ds = random_dataset(&mut rng, 120, 5, task);
        let m = train_gbdt(&ds, &GbdtParams { n_trees: 30, ..Default::default() }).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert_eq!(m.predict_values(&x), naive_predict(&m, &x));
        }
    }
}

#[test]
fn gbdt_loss_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..20 {
        let task = if trial % 2 == 0 { TaskType::Regression } else { TaskType::BinaryClass };
        let (n, d) = (rng.random_range(10..150), rng.random_range(1..6));
        let ds = random_dataset(&mut rng, n, d, task);
        let params = GbdtParams {
            n_trees: 40,
            max_depth: rng.random_range(1..6),
            learning_rate: rng.random_range(0.05..1.0),
            min_leaf: rng.random_range(1..4),
            lambda: rng.random_range(0.0..3.0),
            ..Default::default()
        };
        let (_, history) = train_gbdt_traced(&ds, &params).unwrap();
        for w in history.windows(2) {
            assert!(w[1] <= w[0], "trial {trial}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn gbdt_overfits_small_fixture() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ds = random_dataset(&mut rng, 32, 4, TaskType::Regression);
    let m = train_gbdt(&ds, &GbdtParams::default()).unwrap();
    let mse = ds.rows.iter().zip(&ds.labels).map(|(r, y)| (m.predict_values(r) - y).powi(2)).sum::<f64>() / 32.0;
    assert!(mse < 1e-3, "{mse}");
}

#[test]
fn gbdt_separates_two_clusters() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<f64>> = (0..80)
        .map(|i| vec![if i % 2 == 0 { -1.0 } else { 1.0 } + 0.3 * rng.random::<f64>(), rng.random()])
        .collect();
    let labels: Vec<f64> = (0..80).map(|i| (i % 2) as f64).collect();
    let ds = Dataset::new("c.v1", vec!["a".into(), "b".into()], rows, labels.clone(), TaskType::BinaryClass).unwrap();
    let m = train_gbdt(&ds, &GbdtParams::default()).unwrap();
    let scores: Vec<f64> = ds.rows.iter().map(|r| m.predict_values(r)).collect();
    assert_eq!(auc(&scores, &labels).unwrap(), 1.0);
}

#[test]
fn smo_respects_box_and_equality() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..15 {
        let n = rng.random_range(6..80);
        let ds = random_dataset(&mut rng, n, 3, TaskType::BinaryClass);
        let c = rng.random_range(0.1..20.0);
        let m = train_svm_smo(&ds, c, rng.random_range(0.1..3.0)).unwrap();
        assert!(m.converged);
        assert!(!m.alpha.is_empty());
        assert!(m.alpha.iter().all(|&a| a >= 0.0 && a <= c));
        let eq: f64 = m.alpha.iter().zip(&m.y).map(|(a, y)| a * y).sum();
        assert!(eq.abs() < 1e-6, "{eq}");
    }
}

#[test]
fn bundle_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let speech = random_dataset(&mut rng, 80, 4, TaskType::BinaryClass);
    let motor = random_dataset(&mut rng, 80, 4, TaskType::Regression);
    let bundle = ModelBundle {
        speech: Some(train_gbdt(&speech, &GbdtParams { n_trees: 25, ..Default::default() }).unwrap()),
        face: Some(train_svm_ensemble(&speech, &[vec![0, 1], vec![0, 1, 2, 3]], &SvmParams::default()).unwrap()),
        motor: Some(train_gbdt(&motor, &GbdtParams { n_trees: 25, ..Default::default() }).unwrap()),
        weights: AggregatorWeights::default(),
        ..ModelBundle::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bundle.json");
    save_bundle(&bundle, &path).unwrap();
    let back = load_bundle(&path).unwrap();
    assert_eq!(back, bundle);
    let names: Vec<String> = (0..4).map(|i| format!("x{i}")).collect();
    for _ in 0..100 {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1e3..1e3) * rng.random::<f64>().powi(3)).collect();
        let fv = FeatureVector::new("fixture.v1", names.clone(), x).unwrap();
        let pairs = [
            (predict_gbdt(bundle.speech.as_ref().unwrap(), &fv), predict_gbdt(back.speech.as_ref().unwrap(), &fv)),
            (predict_gbdt(bundle.motor.as_ref().unwrap(), &fv), predict_gbdt(back.motor.as_ref().unwrap(), &fv)),
            (
                predict_svm_ensemble(bundle.face.as_ref().unwrap(), &fv),
                predict_svm_ensemble(back.face.as_ref().unwrap(), &fv),
            ),
        ];
        for (a, b) in pairs {
            assert_eq!(a.unwrap().to_bits(), b.unwrap().to_bits());
        }
    }
}

proptest! {
    #[test]
    fn auc_ignores_monotone_transforms(
        scores in proptest::collection::vec(-5.0f64..5.0, 2..60),
        flips in proptest::collection::vec(any::<bool>(), 60),
        a in 0.01f64..100.0,
        b in -10.0f64..10.0,
    ) {
        let mut labels: Vec<f64> = flips[..scores.len()].iter().map(|&f| f as u8 as f64).collect();
        labels[0] = 1.0;
        labels[1] = 0.0;
        let base = auc(&scores, &labels).unwrap();
        let exp: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        let affine: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
        prop_assert_eq!(auc(&exp, &labels).unwrap(), base);
        prop_assert_eq!(auc(&affine, &labels).unwrap(), base);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn pearson_is_bounded(pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..50)) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Ok((mae, r)) = mae_pearson(&p, &t) {
            prop_assert!(mae >= 0.0);
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn ensemble_output_is_a_probability(x in proptest::collection::vec(-1e4f64..1e4, 2)) {
        let ds = Dataset::new(
            "p.v1",
            vec!["a".into(), "b".into()],
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            vec![0.0, 1.0, 1.0, 0.0],
            TaskType::BinaryClass,
        ).unwrap();
        let e = train_svm_ensemble(&ds, &[vec![0], vec![0, 1]], &SvmParams::default()).unwrap();
        let p = e.predict_values(&x);
        prop_assert!(p > 0.0 && p < 1.0);
    }
}
