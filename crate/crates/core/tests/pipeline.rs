use std::path::Path;

use curl_cotrain::cotrain::{combine_predict_batch, run_curl};
use curl_cotrain::eval::mean_average_precision;
use curl_cotrain::experiment::{cell_run_reports, run_experiment, CotrainSettings, DatasetSource, Precision};
use curl_cotrain::io::{write_dataset, MatrixFormat, SyntheticSpec};
use curl_cotrain::{
    ClassId, CotrainConfig, EpConfig, Error, ExperimentConfig, MultiFeatureDataset, ScenarioKind, Variant,
    VariantName,
};

fn tiny_ep() -> EpConfig {
    EpConfig {
        prototype_sets: 9,
        prototypes_per_set: 4,
        samples_per_prototype: 2,
        hypotheses: 4,
        ..EpConfig::default()
    }
}

fn spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        classes: 3,
        dims: vec![5, 4, 3],
        samples_per_class: 16,
        spread: vec![2.0, 1.0, 0.5].into(),
        noise: 1.0,
        view_correlation: 0.3,
        seed,
    }
}

fn config(rounds: usize) -> ExperimentConfig {
    ExperimentConfig {
        labels_per_class: vec![1, 2],
        runs: 2,
        ep: tiny_ep(),
        cotrain: CotrainSettings {
            rounds,
            ..Default::default()
        },
        dataset: DatasetSource {
            synthetic: Some(spec(3)),
            manifest: None,
        },
        ..ExperimentConfig::default()
    }
}

#[test]
fn run_curl_in_both_precisions() {
    let mut d: MultiFeatureDataset<f64> = curl_cotrain::io::generate_synthetic(&spec(1)).unwrap();
    let truth = d.labels.clone();
    for (i, l) in d.labels.iter_mut().enumerate() {
        if i % 16 >= 3 {
            *l = None;
        }
    }
    let ct = CotrainConfig {
        rounds: 3,
        ..CotrainConfig::default()
    };
    let out = run_curl(&d, &tiny_ep(), &ct).unwrap();
    assert_eq!(out.state.round, 3);
    assert_eq!(out.views.ef_labeled.ncols(), 36);
    assert_eq!(out.views.lf_labeled.ncols(), 36);
    let test_truth: Vec<ClassId> = out.views.unlabeled_ids.iter().map(|&i| truth[i].unwrap()).collect();
    let p = combine_predict_batch(&out.ef, &out.lf, out.views.ef_unlabeled.view(), out.views.lf_unlabeled.view()).unwrap();
    let map = mean_average_precision(p.view(), &test_truth).unwrap();
    assert!(map > 1.0 / 3.0, "MAP {map}");

    let d32: MultiFeatureDataset<f32> = curl_cotrain::io::generate_synthetic(&spec(1)).unwrap();
    let d32 = MultiFeatureDataset { labels: d.labels.clone(), ..d32 };
    let out32 = run_curl(&d32, &tiny_ep(), &ct).unwrap();
    assert_eq!(out32.state.round, 3);
    assert_eq!(out32.views.n_unlabeled(), out.views.n_unlabeled());
}

#[test]
fn report_grid_has_one_row_per_setting_variant_and_round() {
    let report = run_experiment(&config(2), Path::new(".")).unwrap();
    assert_eq!(report.summary.len(), 2 * 6 * 3);
    assert_eq!(report.baseline.len(), 2);
    assert_eq!(report.cells.len(), 4);
    for row in &report.summary {
        assert_eq!(row.runs, 2);
        assert!((0.0..=1.0).contains(&row.mean_map));
    }
    // Round 0 of an early-fusion variant is the baseline itself.
    for cell in &report.cells {
        let ef0 = cell.rounds.iter().find(|e| e.variant == "CURL-EF" && e.round == 0).unwrap();
        assert_eq!(ef0.map, cell.baseline_map);
    }
    let csv = report.summary_csv();
    assert_eq!(csv.lines().count(), 1 + 2 + 36);
}

#[test]
fn five_rounds_give_six_entries_per_variant() {
    let mut cfg = config(5);
    cfg.labels_per_class = vec![2];
    cfg.runs = 1;
    let report = run_experiment(&cfg, Path::new(".")).unwrap();
    let runs = cell_run_reports(&report);
    assert_eq!(runs.len(), 1);
    for v in VariantName::ALL {
        assert_eq!(runs[0].1.maps(v.as_str()).len(), 6);
    }
    let zero = run_experiment(&config(0), Path::new(".")).unwrap();
    for (_, run) in cell_run_reports(&zero) {
        assert!(run.rounds.iter().all(|e| e.round == 0 && e.additions.is_empty()));
        assert_eq!(run.maps("CURL-LF").len(), 1);
    }
}

#[test]
fn nms_variants_log_at_most_one_addition_per_class_and_view() {
    let mut cfg = config(3);
    cfg.cotrain.t1 = 0.4;
    cfg.cotrain.t2 = 0.2;
    let report = run_experiment(&cfg, Path::new(".")).unwrap();
    for cell in &report.cells {
        for e in cell.rounds.iter().filter(|e| e.variant == "CURL-EF&LF") {
            for view in ["EF", "LF"] {
                for k in 1..=3 {
                    let n = e
                        .additions
                        .iter()
                        .filter(|a| a.class == k && serde_json::to_value(a.view).unwrap() == view)
                        .count();
                    assert!(n <= 1);
                }
            }
        }
    }
    assert_eq!(VariantName::EfLf.mode(), Variant::Nms);
}

#[test]
fn manifest_and_external_pool_in_self_taught_mode() {
    let dir = tempfile::tempdir().unwrap();
    let d: MultiFeatureDataset<f64> = curl_cotrain::io::generate_synthetic(&spec(5)).unwrap();
    write_dataset(&d, &dir.path().join("main"), "main", MatrixFormat::Binary).unwrap();
    let mut ext: MultiFeatureDataset<f64> = curl_cotrain::io::generate_synthetic(&spec(6)).unwrap();
    ext.labels = vec![None; ext.n_samples()];
    write_dataset(&ext, &dir.path().join("ext"), "ext", MatrixFormat::Csv).unwrap();

    let cfg = ExperimentConfig {
        scenario: ScenarioKind::SelfTaught,
        dataset: DatasetSource {
            manifest: Some("main/manifest.json".into()),
            synthetic: None,
        },
        external: Some(DatasetSource {
            manifest: Some("ext/manifest.json".into()),
            synthetic: None,
        }),
        labels_per_class: vec![2],
        runs: 1,
        variants: vec![VariantName::Lf],
        precision: Precision::F32,
        ..config(2)
    };
    let report = run_experiment(&cfg, dir.path()).unwrap();
    let additions: Vec<usize> = report.cells[0].rounds.iter().flat_map(|e| e.additions.iter().map(|a| a.sample_id)).collect();
    assert!(additions.iter().all(|&id| id < ext.n_samples()));
    assert_eq!(report.summary.len(), 3);
}

#[test]
fn too_few_labels_names_the_class() {
    let mut cfg = config(1);
    cfg.labels_per_class = vec![40];
    match run_experiment(&cfg, Path::new(".")) {
        Err(Error::InsufficientSamples { class, available, required }) => {
            assert_eq!(class, "1");
            assert_eq!((available, required), (16, 40));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn thread_count_does_not_change_the_report() {
    let cfg = config(2);
    let a = curl_cotrain::experiment::run_experiment_with_threads(&cfg, Path::new("."), Some(1)).unwrap();
    let b = curl_cotrain::experiment::run_experiment_with_threads(&cfg, Path::new("."), Some(3)).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}
