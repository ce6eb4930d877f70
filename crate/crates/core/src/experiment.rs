//! Batch experiments: random labeled/unlabeled splits, every requested
//! co-training variant, and MAP on the scenario's test pool after each round.
//!
//! A configuration is a TOML (or JSON) document:
//!
//! ```toml
//! scenario = "inductive"
//! labels_per_class = [1, 2, 3, 5, 10, 20]
//! runs = 10
//!
//! [dataset]
//! manifest = "data/scene15/manifest.json"
//!
//! [ep]
//! prototype_sets = 300
//!
//! [cotrain]
//! rounds = 5
//! t1 = 0.7
//! t2 = 0.4
//! ```
//!
//! Omitted keys take their defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cotrain::{combine_predict_batch, train_baseline, CotrainConfig, Cotrainer, Variant};
use crate::error::{Error, Result};
use crate::eval::{mean_average_precision, split_scenario, PoolSource, ScenarioKind, ScenarioSplit};
use crate::fusion::UrlModel;
use crate::io::manifest::load_dataset;
use crate::io::report::{CellReport, ExperimentReport, RoundEntry, RunReport, SummaryRow};
use crate::io::synthetic::{generate_synthetic, SyntheticSpec};
use crate::logreg::LogRegConfig;
use crate::projection::EpConfig;
use crate::rng::{self, derive_seed, NS_PROJECTION, NS_SPLIT};
use crate::scalar::Scalar;
use crate::types::{ClassId, MultiFeatureDataset, ViewKind};

/// Name of the baseline row in reports.
pub const BASELINE_NAME: &str = "EP+LR";

/// A reported classifier: which co-training mode produced it and which
/// view(s) it predicts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariantName {
    #[serde(rename = "CURL-EF")]
    Ef,
    #[serde(rename = "CURL-LF")]
    Lf,
    #[serde(rename = "CURL-EF&LF")]
    EfLf,
    #[serde(rename = "CURL-EF_n")]
    EfAll,
    #[serde(rename = "CURL-LF_n")]
    LfAll,
    #[serde(rename = "CURL-EF&LF_n")]
    EfLfAll,
}

impl VariantName {
    pub const ALL: [VariantName; 6] = [
        VariantName::Ef,
        VariantName::Lf,
        VariantName::EfLf,
        VariantName::EfAll,
        VariantName::LfAll,
        VariantName::EfLfAll,
    ];

    pub fn mode(self) -> Variant {
        match self {
            VariantName::Ef | VariantName::Lf | VariantName::EfLf => Variant::Nms,
            _ => Variant::AddAll,
        }
    }

    pub fn views(self) -> &'static [ViewKind] {
        match self {
            VariantName::Ef | VariantName::EfAll => &[ViewKind::EarlyFusion],
            VariantName::Lf | VariantName::LfAll => &[ViewKind::LateFusion],
            VariantName::EfLf | VariantName::EfLfAll => &[ViewKind::EarlyFusion, ViewKind::LateFusion],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VariantName::Ef => "CURL-EF",
            VariantName::Lf => "CURL-LF",
            VariantName::EfLf => "CURL-EF&LF",
            VariantName::EfAll => "CURL-EF_n",
            VariantName::LfAll => "CURL-LF_n",
            VariantName::EfLfAll => "CURL-EF&LF_n",
        }
    }
}

impl fmt::Display for VariantName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parses TOML, or JSON when the text starts with `{`.
pub fn parse_document<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    } else {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Either a manifest on disk or a synthetic generator spec.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

impl DatasetSource {
    fn load<F: Scalar>(&self, base_dir: &Path) -> Result<MultiFeatureDataset<F>> {
        match (&self.manifest, &self.synthetic) {
            (Some(m), None) => {
                let p = if m.is_absolute() { m.clone() } else { base_dir.join(m) };
                load_dataset(&p)
            }
            (None, Some(spec)) => generate_synthetic(spec),
            _ => Err(Error::Config(
                "a dataset needs exactly one of `manifest` or `synthetic`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

/// Co-training settings shared by both modes; the mode comes from the variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CotrainSettings {
    pub rounds: usize,
    pub t1: f64,
    pub t2: f64,
    pub classifier: LogRegConfig,
}

impl Default for CotrainSettings {
    fn default() -> Self {
        let d = CotrainConfig::default();
        CotrainSettings {
            rounds: d.rounds,
            t1: d.t1,
            t2: d.t2,
            classifier: d.classifier,
        }
    }
}

impl CotrainSettings {
    pub fn with_mode(&self, variant: Variant) -> CotrainConfig {
        CotrainConfig {
            rounds: self.rounds,
            t1: self.t1,
            t2: self.t2,
            variant,
            classifier: self.classifier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetSource,
    /// Unlabeled training data for the self-taught scenario.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub external: Option<DatasetSource>,
    pub scenario: ScenarioKind,
    pub labels_per_class: Vec<usize>,
    /// Repetitions with independent random splits per setting.
    #[serde(alias = "seeds")]
    pub runs: usize,
    pub seed: u64,
    pub variants: Vec<VariantName>,
    pub precision: Precision,
    pub ep: EpConfig,
    pub cotrain: CotrainSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            dataset: DatasetSource::default(),
            external: None,
            scenario: ScenarioKind::Inductive,
            labels_per_class: vec![1, 2, 3, 5, 10, 20],
            runs: 10,
            seed: 0,
            variants: VariantName::ALL.to_vec(),
            precision: Precision::F64,
            ep: EpConfig::default(),
            cotrain: CotrainSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = parse_document(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.ep.validate()?;
        self.cotrain.with_mode(Variant::Nms).validate()?;
        if self.labels_per_class.is_empty() || self.labels_per_class.contains(&0) {
            return Err(Error::Config("labels_per_class needs positive entries".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("at least one variant is required".into()));
        }
        let sources = [&self.dataset].into_iter().chain(self.external.as_ref());
        for s in sources {
            if s.manifest.is_some() == s.synthetic.is_some() {
                return Err(Error::Config(
                    "a dataset needs exactly one of `manifest` or `synthetic`".into(),
                ));
            }
            if let Some(spec) = &s.synthetic {
                spec.validate()?;
            }
        }
        match (self.scenario, self.external.is_some()) {
            (ScenarioKind::SelfTaught, false) => Err(Error::Config(
                "the self_taught scenario needs an `external` dataset".into(),
            )),
            (ScenarioKind::SelfTaught, true) | (_, false) => Ok(()),
            (_, true) => Err(Error::Config(format!(
                "`external` is only used by the self_taught scenario, not {}",
                self.scenario
            ))),
        }
    }

    fn modes(&self) -> Vec<Variant> {
        let mut modes: Vec<Variant> = Vec::new();
        for v in &self.variants {
            if !modes.contains(&v.mode()) {
                modes.push(v.mode());
            }
        }
        modes
    }
}

/// Evaluation pool and data for one cell.
struct CellData<F> {
    test_ef: Array2<F>,
    test_lf: Array2<F>,
    truth: Vec<ClassId>,
}

fn training_dataset<F: Scalar>(
    data: &MultiFeatureDataset<F>,
    external: Option<&MultiFeatureDataset<F>>,
    split: &ScenarioSplit,
) -> Result<MultiFeatureDataset<F>> {
    let labeled = data.select_rows(&split.labeled, split.labeled.iter().map(|&i| data.labels[i]).collect());
    let source = match split.train_unlabeled_source {
        PoolSource::Original => data,
        PoolSource::External => external.expect("split drew from the external dataset"),
    };
    let mut unlabeled = source.select_rows(&split.train_unlabeled, vec![None; split.train_unlabeled.len()]);
    unlabeled.n_classes = data.n_classes;
    unlabeled.class_names = data.class_names.clone();
    labeled.concat_rows(&unlabeled)
}

fn map_of<F: Scalar>(scores: &Array2<F>, truth: &[ClassId]) -> Result<f64> {
    mean_average_precision(scores.view(), truth).map(Scalar::as_f64)
}

/// Runs one (labels per class, repetition) cell.
pub fn run_cell<F: Scalar>(
    config: &ExperimentConfig,
    data: &MultiFeatureDataset<F>,
    external: Option<&MultiFeatureDataset<F>>,
    labels_per_class: usize,
    run: usize,
) -> Result<CellReport> {
    let cell_seed = derive_seed(config.seed, &[labels_per_class as u64, run as u64]);
    let split = split_scenario(
        data,
        config.scenario,
        labels_per_class,
        external,
        &mut rng::stream(cell_seed, &[NS_SPLIT]),
    )?;
    let train = training_dataset(data, external, &split)?;
    let n_labeled = split.labeled.len();
    let ep = EpConfig {
        seed: derive_seed(cell_seed, &[NS_PROJECTION]),
        ..config.ep
    };
    let url = UrlModel::fit(&train, &ep)?;
    let mut views = url.views(&train, (0..n_labeled).collect(), (n_labeled..train.n_samples()).collect())?;
    // Report sample ids in the numbering of the dataset each pool came from.
    views.labeled_ids = split.labeled.clone();
    views.unlabeled_ids = split.train_unlabeled.clone();

    let test = data.select_rows(&split.test, split.test.iter().map(|&i| data.labels[i]).collect());
    let all_test: Vec<usize> = (0..test.n_samples()).collect();
    let cell = CellData {
        test_ef: url.project_early(&test, &all_test)?,
        test_lf: url.project_late(&test, &all_test)?,
        truth: test.labels.iter().map(|l| l.expect("test rows carry ground truth")).collect(),
    };
    let labels: Vec<ClassId> = split.labeled.iter().map(|&i| data.labels[i].expect("labeled row")).collect();

    let baseline = train_baseline(&views, &labels, data.n_classes, &config.cotrain.classifier)?;
    let baseline_map = map_of(&baseline.predict_proba_batch(cell.test_ef.view())?, &cell.truth)?;

    let mut rounds = Vec::new();
    for mode in config.modes() {
        let requested: Vec<VariantName> = config.variants.iter().copied().filter(|v| v.mode() == mode).collect();
        let mut trainer = Cotrainer::new(&views, &labels, data.n_classes, config.cotrain.with_mode(mode))?;
        for round in 0..=config.cotrain.rounds {
            if round > 0 {
                trainer.step()?;
            }
            let ef = trainer.classifier(ViewKind::EarlyFusion);
            let lf = trainer.classifier(ViewKind::LateFusion);
            for &variant in &requested {
                let scores = match variant.views() {
                    [ViewKind::EarlyFusion] => ef.predict_proba_batch(cell.test_ef.view())?,
                    [ViewKind::LateFusion] => lf.predict_proba_batch(cell.test_lf.view())?,
                    _ => combine_predict_batch(ef, lf, cell.test_ef.view(), cell.test_lf.view())?,
                };
                let map = map_of(&scores, &cell.truth)?;
                rounds.push(RoundEntry::from_state(round, variant.as_str(), map, trainer.state(), variant.views()));
            }
        }
    }
    rounds.sort_by_key(|e| {
        let idx = config.variants.iter().position(|v| v.as_str() == e.variant);
        (idx, e.round)
    });
    Ok(CellReport {
        labels_per_class,
        run,
        seed: cell_seed,
        baseline_map,
        rounds,
    })
}

fn summarize(labels_per_class: usize, variant: &str, round: usize, maps: &[f64]) -> SummaryRow {
    let n = maps.len() as f64;
    let mean = maps.iter().sum::<f64>() / n;
    let var = maps.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n;
    SummaryRow {
        labels_per_class,
        variant: variant.to_string(),
        round,
        mean_map: mean,
        std_map: var.sqrt(),
        runs: maps.len(),
    }
}

fn run_typed<F: Scalar>(config: &ExperimentConfig, base_dir: &Path) -> Result<ExperimentReport> {
    let data: MultiFeatureDataset<F> = config.dataset.load(base_dir)?;
    if data.n_classes < 2 || data.labels.iter().all(Option::is_none) {
        return Err(Error::InvalidDataset("experiments need a labeled dataset with at least two classes".into()));
    }
    let external: Option<MultiFeatureDataset<F>> = config.external.as_ref().map(|s| s.load(base_dir)).transpose()?;
    if let Some(ext) = &external {
        if ext.feature_dims() != data.feature_dims() {
            return Err(Error::InvalidDataset(format!(
                "external feature dims {:?} differ from dataset dims {:?}",
                ext.feature_dims(),
                data.feature_dims()
            )));
        }
    }

    let cells: Vec<(usize, usize)> = config
        .labels_per_class
        .iter()
        .flat_map(|&l| (0..config.runs).map(move |r| (l, r)))
        .collect();
    let reports = cells
        .par_iter()
        .map(|&(l, r)| run_cell(config, &data, external.as_ref(), l, r))
        .collect::<Result<Vec<_>>>()?;

    let mut baseline = Vec::new();
    let mut summary = Vec::new();
    for &l in &config.labels_per_class {
        let group: Vec<&CellReport> = reports.iter().filter(|c| c.labels_per_class == l).collect();
        let maps: Vec<f64> = group.iter().map(|c| c.baseline_map).collect();
        baseline.push(summarize(l, BASELINE_NAME, 0, &maps));
        for v in &config.variants {
            for round in 0..=config.cotrain.rounds {
                let maps: Vec<f64> = group
                    .iter()
                    .flat_map(|c| c.rounds.iter().filter(|e| e.variant == v.as_str() && e.round == round))
                    .map(|e| e.map)
                    .collect();
                summary.push(summarize(l, v.as_str(), round, &maps));
            }
        }
    }
    Ok(ExperimentReport {
        config: serde_json::to_value(config).expect("config serializes"),
        cells: reports,
        baseline,
        summary,
    })
}

/// Runs every cell of the experiment. Relative dataset paths resolve against
/// `base_dir`.
///
/// Cells run concurrently; the report does not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig, base_dir: &Path) -> Result<ExperimentReport> {
    config.validate()?;
    match config.precision {
        Precision::F64 => run_typed::<f64>(config, base_dir),
        Precision::F32 => run_typed::<f32>(config, base_dir),
    }
}

/// [`run_experiment`] on a dedicated pool of `threads` workers, or on the
/// global pool when `None`.
pub fn run_experiment_with_threads(
    config: &ExperimentConfig,
    base_dir: &Path,
    threads: Option<usize>,
) -> Result<ExperimentReport> {
    match threads {
        None => run_experiment(config, base_dir),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?;
            pool.install(|| run_experiment(config, base_dir))
        }
    }
}

/// Per-cell run reports, named `lpc{labels}_run{run}`.
pub fn cell_run_reports(report: &ExperimentReport) -> Vec<(String, RunReport)> {
    report
        .cells
        .iter()
        .map(|c| {
            let mut config = report.config.clone();
            if let Some(obj) = config.as_object_mut() {
                obj.insert("labels_per_class".into(), c.labels_per_class.into());
                obj.insert("run".into(), c.run.into());
                obj.insert("cell_seed".into(), c.seed.into());
                obj.insert("baseline_map".into(), c.baseline_map.into());
            }
            let name = format!("lpc{}_run{}", c.labels_per_class, c.run);
            (name, RunReport { config, rounds: c.rounds.clone() })
        })
        .collect()
}

/// Human-readable summary of a dataset manifest.
pub fn describe_dataset(manifest: &Path) -> Result<String> {
    let d: MultiFeatureDataset<f64> = load_dataset(manifest)?;
    let mut out = String::new();
    out.push_str(&format!("manifest: {}\n", manifest.display()));
    out.push_str(&format!("samples (N): {}\n", d.n_samples()));
    out.push_str(&format!("features (S): {}\n", d.n_features()));
    for (name, m) in d.feature_names.iter().zip(&d.features) {
        out.push_str(&format!("  {name}: dim {}\n", m.ncols()));
    }
    let labeled = d.labeled_indices().len();
    if labeled == 0 {
        out.push_str("classes (K): unknown (no labels)\n");
    } else {
        out.push_str(&format!("classes (K): {}\n", d.n_classes));
        out.push_str(&format!("labeled: {labeled} of {} ({:.1}%)\n", d.n_samples(), 100.0 * labeled as f64 / d.n_samples() as f64));
        for (k, name) in d.class_names.iter().enumerate() {
            let count = d.labels.iter().filter(|l| l.map(ClassId::index) == Some(k)).count();
            out.push_str(&format!("  {}: {name} x{count}\n", k + 1));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_reference_defaults() {
        let cfg = ExperimentConfig::parse("[dataset]\nmanifest = \"m.json\"\n").unwrap();
        assert_eq!(cfg.ep.prototype_sets, 300);
        assert_eq!(cfg.ep.prototypes_per_set, 30);
        assert_eq!(cfg.ep.samples_per_prototype, 6);
        assert_eq!(cfg.ep.hypotheses, 50);
        assert_eq!(cfg.ep.logreg.c, 15.0);
        assert_eq!(cfg.cotrain.rounds, 5);
        assert_eq!(cfg.labels_per_class, vec![1, 2, 3, 5, 10, 20]);
        assert_eq!(cfg.runs, 10);
        assert_eq!(cfg.variants.len(), 6);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(ExperimentConfig::parse("runs = 0\n[dataset]\nmanifest = \"m\"\n"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("[dataset]\n"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("bogus = 1\n"), Err(Error::Config(_))));
        assert!(matches!(
            ExperimentConfig::parse("scenario = \"self_taught\"\n[dataset]\nmanifest = \"m\"\n"),
            Err(Error::Config(_))
        ));
        let inverted = "[dataset]\nmanifest = \"m\"\n[cotrain]\nt1 = 0.3\nt2 = 0.5\n";
        assert!(matches!(ExperimentConfig::parse(inverted), Err(Error::Config(_))));
    }

    #[test]
    fn json_config_and_variant_names() {
        let cfg = ExperimentConfig::parse(
            r#"{"dataset": {"manifest": "m.json"}, "variants": ["CURL-LF", "CURL-EF&LF_n"]}"#,
        )
        .unwrap();
        assert_eq!(cfg.variants, vec![VariantName::Lf, VariantName::EfLfAll]);
        assert_eq!(cfg.modes(), vec![Variant::Nms, Variant::AddAll]);
    }
}
