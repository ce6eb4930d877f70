use curl_cotrain::cotrain::{apply_round_selection, CotrainState, ScoreSnapshot};
use curl_cotrain::eval::{average_precision, inductive_train_size, mean_average_precision, split_scenario};
use curl_cotrain::io::{generate_synthetic, SyntheticSpec};
use curl_cotrain::logreg::{loss_and_gradient, n_parameters};
use curl_cotrain::projection::blocks;
use curl_cotrain::{
    ClassId, ConfidenceVector, CotrainConfig, EpConfig, MultiFeatureDataset, ProjectionEnsemble, ScenarioKind, Variant,
    ViewKind,
};
use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn simplex_rows(raw: Vec<f64>, k: usize) -> Array2<f64> {
    let mut m = Array2::from_shape_vec((raw.len() / k, k), raw).unwrap();
    for mut row in m.axis_iter_mut(Axis(0)) {
        let s = row.sum();
        row /= s;
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ap_ignores_strictly_monotone_transforms(
        pairs in prop::collection::vec((0u8..6, any::<bool>()), 1..25)
    ) {
        prop_assume!(pairs.iter().any(|p| p.1));
        let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 5.0).collect();
        let pos: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + s * s * s).collect();
        let a = average_precision(&scores, &pos).unwrap();
        let b = average_precision(&warped, &pos).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn map_lies_in_unit_interval(k in 2usize..5, extra in prop::collection::vec((0usize..5, prop::collection::vec(0.0f64..1.0, 4)), 0..20)) {
        let mut truth: Vec<ClassId> = (0..k).map(ClassId::from_index).collect();
        let mut rows: Vec<f64> = (0..k * 4).map(|i| (i % 7) as f64 / 7.0).collect();
        for (c, s) in &extra {
            truth.push(ClassId::from_index(c % k));
            rows.extend(s);
        }
        let scores = Array2::from_shape_vec((truth.len(), 4), rows).unwrap();
        let scores = scores.slice(ndarray::s![.., ..k]).to_owned();
        let map = mean_average_precision(scores.view(), &truth).unwrap();
        prop_assert!((0.0..=1.0).contains(&map));
    }

    #[test]
    fn logistic_objective_is_nonnegative(seed in any::<u64>(), n in 0usize..8, d in 1usize..4, k in 2usize..4) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-3.0..3.0));
        let y: Vec<ClassId> = (0..n).map(|_| ClassId::new(rng.random_range(1..=k))).collect();
        let p = Array1::from_shape_fn(n_parameters(k, d), |_| rng.random_range(-2.0..2.0));
        let (f, g) = loss_and_gradient(p.view(), x.view(), &y, k, 15.0).unwrap();
        prop_assert!(f >= 0.0);
        prop_assert_eq!(g.len(), p.len());
    }

    #[test]
    fn pseudo_label_is_first_maximum(raw in prop::collection::vec(0u8..4, 2..7)) {
        let scores = Array1::from_iter(raw.iter().map(|&v| v as f64));
        let (label, conf) = ConfidenceVector::from_probabilities(scores.clone()).pseudo_label();
        let max = scores.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        prop_assert_eq!(conf, max);
        prop_assert_eq!(label.index(), scores.iter().position(|&v| v == max).unwrap());
    }

    #[test]
    fn inductive_split_partitions_the_pool(per_class in 3usize..40, classes in 2usize..4, lpc in 1usize..3, seed in any::<u64>()) {
        let d: MultiFeatureDataset<f64> = generate_synthetic(&SyntheticSpec {
            classes,
            dims: vec![2],
            samples_per_class: per_class,
            spread: 1.0.into(),
            noise: 1.0,
            view_correlation: 0.0,
            seed,
        }).unwrap();
        let pool = d.n_samples() - lpc * classes;
        prop_assume!(inductive_train_size(pool) > 0 && inductive_train_size(pool) < pool);
        let s = split_scenario(&d, ScenarioKind::Inductive, lpc, None, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(s.train_unlabeled.len(), (pool as f64 * 0.25).round() as usize);
        prop_assert_eq!(s.test.len(), pool - s.train_unlabeled.len());
        let mut all: Vec<usize> = s.labeled.iter().chain(&s.train_unlabeled).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..d.n_samples()).collect::<Vec<_>>());
        for k in 0..classes {
            prop_assert_eq!(s.labeled.iter().filter(|&&i| d.labels[i].unwrap().index() == k).count(), lpc);
        }
    }

    #[test]
    fn synthetic_output_validates(classes in 1usize..4, dims in prop::collection::vec(1usize..5, 1..4), n in 1usize..6, rho in 0.0f64..=1.0, seed in any::<u64>()) {
        let d: MultiFeatureDataset<f64> = generate_synthetic(&SyntheticSpec {
            classes,
            dims: dims.clone(),
            samples_per_class: n,
            spread: 2.0.into(),
            noise: 0.5,
            view_correlation: rho,
            seed,
        }).unwrap();
        prop_assert!(d.validate().is_empty());
        prop_assert_eq!(d.feature_dims(), dims);
        prop_assert_eq!(d.n_samples(), classes * n);
    }

    #[test]
    fn selection_rounds_keep_ledgers_consistent(
        seed in any::<u64>(),
        n in 1usize..30,
        k in 2usize..5,
        nms in any::<bool>(),
        rounds in 1usize..5,
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = CotrainConfig {
            variant: if nms { Variant::Nms } else { Variant::AddAll },
            t1: 0.5,
            t2: 0.3,
            ..CotrainConfig::default()
        };
        let ids: Vec<usize> = (0..n).map(|i| 100 + 3 * i).collect();
        let mut state = CotrainState::<f64>::new(n);
        for round in 1..=rounds {
            let mut draw = || simplex_rows((0..n * k).map(|_| rng.random_range(0.01..1.0f64).powi(4)).collect(), k);
            let snap = ScoreSnapshot::new(draw(), draw());
            let before = [state.ef.in_training.clone(), state.lf.in_training.clone()];
            let adds = apply_round_selection(&mut state, &snap, &ids, &config);
            state.round += 1;
            for a in &adds {
                let prev = &before[a.view as usize];
                prop_assert!(!prev[a.position], "position re-added");
                prop_assert_eq!(a.label.round, round);
                prop_assert_eq!(a.label.sample_id, ids[a.position]);
                prop_assert_eq!(a.label.source_view, a.view.other());
                prop_assert_eq!(snap.labels(a.view.other())[a.position], a.label.label);
                prop_assert!(a.label.confidence > config.t2);
            }
            if nms {
                for view in [ViewKind::EarlyFusion, ViewKind::LateFusion] {
                    for c in 0..k {
                        let count = adds.iter().filter(|a| a.view == view && a.label.label.index() == c).count();
                        prop_assert!(count <= 1);
                    }
                }
            }
        }
        for view in [ViewKind::EarlyFusion, ViewKind::LateFusion] {
            let ledger = state.ledger(view);
            let mut seen = ledger.positions.clone();
            seen.sort_unstable();
            seen.dedup();
            prop_assert_eq!(seen.len(), ledger.len());
            prop_assert_eq!(ledger.in_training.iter().filter(|&&b| b).count(), ledger.len());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn projection_blocks_are_simplices(seed in any::<u64>(), rows in 12usize..40, cols in 1usize..6, t in 1usize..6, r in 2usize..5) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-5.0..5.0f64));
        let cfg = EpConfig {
            prototype_sets: t,
            prototypes_per_set: r,
            samples_per_prototype: 2,
            hypotheses: 3,
            seed,
            ..EpConfig::default()
        };
        let ens = ProjectionEnsemble::fit(data.view(), &cfg).unwrap();
        let out = ens.project_batch(data.view()).unwrap();
        prop_assert_eq!(out.ncols(), t * r);
        for row in out.axis_iter(Axis(0)) {
            for block in blocks(row, r) {
                prop_assert!((block.sum() - 1.0).abs() < 1e-9);
                prop_assert!(block.iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }
}
