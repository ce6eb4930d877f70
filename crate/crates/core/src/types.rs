//! Shared data model: multi-feature datasets, class identifiers, fused views
//! and classifier confidences.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A 1-based class identifier in `{1..K}`.
///
/// Construction does not check the range; [`MultiFeatureDataset::validate`]
/// reports out-of-range labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(usize);

impl ClassId {
    pub const fn new(one_based: usize) -> Self {
        ClassId(one_based)
    }

    /// Class for a 0-based column index.
    pub const fn from_index(index: usize) -> Self {
        ClassId(index + 1)
    }

    pub const fn get(self) -> usize {
        self.0
    }

    /// 0-based column index. Panics on the invalid class `0`.
    pub fn index(self) -> usize {
        self.0
            .checked_sub(1)
            .expect("class ids are 1-based; found 0")
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which co-training view a quantity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViewKind {
    #[serde(rename = "EF")]
    EarlyFusion,
    #[serde(rename = "LF")]
    LateFusion,
}

impl ViewKind {
    pub fn other(self) -> Self {
        match self {
            ViewKind::EarlyFusion => ViewKind::LateFusion,
            ViewKind::LateFusion => ViewKind::EarlyFusion,
        }
    }
}

impl fmt::Display for ViewKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViewKind::EarlyFusion => "EF",
            ViewKind::LateFusion => "LF",
        })
    }
}

/// S raw feature matrices over the same N samples, plus optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiFeatureDataset<F> {
    pub features: Vec<Array2<F>>,
    pub feature_names: Vec<String>,
    /// `None` marks an unlabeled sample.
    pub labels: Vec<Option<ClassId>>,
    pub n_classes: usize,
    /// Original label token for each class, indexed by `ClassId::index`.
    pub class_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoFeatures,
    EmptyFeature { feature: String },
    RowCountMismatch { feature: String, expected: usize, found: usize },
    LabelCountMismatch { expected: usize, found: usize },
    LabelOutOfRange { row: usize, label: usize, n_classes: usize },
    NonFinite { feature: String, row: usize, column: usize },
    FeatureNameCount { expected: usize, found: usize },
    DuplicateFeatureName { feature: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoFeatures => write!(f, "dataset has no features"),
            Violation::EmptyFeature { feature } => write!(f, "feature '{feature}' has zero columns"),
            Violation::RowCountMismatch { feature, expected, found } => {
                write!(f, "feature '{feature}' has {found} rows, expected {expected}")
            }
            Violation::LabelCountMismatch { expected, found } => {
                write!(f, "{found} labels for {expected} rows")
            }
            Violation::LabelOutOfRange { row, label, n_classes } => {
                write!(f, "row {row}: label {label} outside 1..={n_classes}")
            }
            Violation::NonFinite { feature, row, column } => {
                write!(f, "feature '{feature}' row {row} column {column} is not finite")
            }
            Violation::FeatureNameCount { expected, found } => {
                write!(f, "{found} feature names for {expected} features")
            }
            Violation::DuplicateFeatureName { feature } => {
                write!(f, "duplicate feature name '{feature}'")
            }
        }
    }
}

impl<F: Scalar> MultiFeatureDataset<F> {
    /// Assembles a dataset without checking invariants; see [`Self::validate`].
    pub fn new(
        features: Vec<Array2<F>>,
        feature_names: Vec<String>,
        labels: Vec<Option<ClassId>>,
        n_classes: usize,
    ) -> Self {
        let class_names = (1..=n_classes).map(|k| k.to_string()).collect();
        MultiFeatureDataset {
            features,
            feature_names,
            labels,
            n_classes,
            class_names,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn feature_dims(&self) -> Vec<usize> {
        self.features.iter().map(|m| m.ncols()).collect()
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|_| i))
            .collect()
    }

    pub fn unlabeled_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.is_none().then_some(i))
            .collect()
    }

    /// Checks every dataset invariant. The report is empty iff all hold.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.features.is_empty() {
            out.push(Violation::NoFeatures);
        }
        if self.feature_names.len() != self.features.len() {
            out.push(Violation::FeatureNameCount {
                expected: self.features.len(),
                found: self.feature_names.len(),
            });
        }
        for (i, name) in self.feature_names.iter().enumerate() {
            if self.feature_names[..i].contains(name) {
                out.push(Violation::DuplicateFeatureName {
                    feature: name.clone(),
                });
            }
        }
        let n = self.features.first().map_or(self.labels.len(), |m| m.nrows());
        for (s, m) in self.features.iter().enumerate() {
            let name = self.feature_name(s);
            if m.ncols() == 0 {
                out.push(Violation::EmptyFeature {
                    feature: name.clone(),
                });
            }
            if m.nrows() != n {
                out.push(Violation::RowCountMismatch {
                    feature: name.clone(),
                    expected: n,
                    found: m.nrows(),
                });
            }
            if let Some(((row, column), _)) = m.indexed_iter().find(|(_, v)| !v.is_finite()) {
                out.push(Violation::NonFinite {
                    feature: name,
                    row,
                    column,
                });
            }
        }
        if self.labels.len() != n {
            out.push(Violation::LabelCountMismatch {
                expected: n,
                found: self.labels.len(),
            });
        }
        for (row, label) in self.labels.iter().enumerate() {
            if let Some(k) = label {
                if k.get() == 0 || k.get() > self.n_classes {
                    out.push(Violation::LabelOutOfRange {
                        row,
                        label: k.get(),
                        n_classes: self.n_classes,
                    });
                }
            }
        }
        out
    }

    /// Returns the dataset if it passes validation, otherwise the first violations.
    pub fn validated(self) -> Result<Self> {
        let report = self.validate();
        if report.is_empty() {
            Ok(self)
        } else {
            let msg: Vec<String> = report.iter().map(|v| v.to_string()).collect();
            Err(Error::InvalidDataset(msg.join("; ")))
        }
    }

    fn feature_name(&self, s: usize) -> String {
        self.feature_names
            .get(s)
            .cloned()
            .unwrap_or_else(|| format!("#{}", s + 1))
    }

    /// New dataset holding `rows` (in the given order) with the supplied labels.
    pub fn select_rows(&self, rows: &[usize], labels: Vec<Option<ClassId>>) -> Self {
        assert_eq!(rows.len(), labels.len());
        MultiFeatureDataset {
            features: self.features.iter().map(|m| m.select(Axis(0), rows)).collect(),
            feature_names: self.feature_names.clone(),
            labels,
            n_classes: self.n_classes,
            class_names: self.class_names.clone(),
        }
    }

    /// Appends the rows of `other` (same features) below `self`.
    pub fn concat_rows(&self, other: &Self) -> Result<Self> {
        if self.feature_dims() != other.feature_dims() {
            return Err(Error::InvalidDataset(format!(
                "cannot stack datasets with feature dims {:?} and {:?}",
                self.feature_dims(),
                other.feature_dims()
            )));
        }
        let features = self
            .features
            .iter()
            .zip(&other.features)
            .map(|(a, b)| ndarray::concatenate(Axis(0), &[a.view(), b.view()]).expect("same width"))
            .collect();
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().copied());
        Ok(MultiFeatureDataset {
            features,
            feature_names: self.feature_names.clone(),
            labels,
            n_classes: self.n_classes,
            class_names: self.class_names.clone(),
        })
    }
}

/// Early- and late-fusion representations of the labeled and unlabeled pools.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewPair<F> {
    pub ef_labeled: Array2<F>,
    pub ef_unlabeled: Array2<F>,
    pub lf_labeled: Array2<F>,
    pub lf_unlabeled: Array2<F>,
    /// Source-dataset row of each labeled row, ascending.
    pub labeled_ids: Vec<usize>,
    /// Source-dataset row of each unlabeled row, ascending.
    pub unlabeled_ids: Vec<usize>,
}

impl<F: Scalar> ViewPair<F> {
    pub fn labeled(&self, view: ViewKind) -> &Array2<F> {
        match view {
            ViewKind::EarlyFusion => &self.ef_labeled,
            ViewKind::LateFusion => &self.lf_labeled,
        }
    }

    pub fn unlabeled(&self, view: ViewKind) -> &Array2<F> {
        match view {
            ViewKind::EarlyFusion => &self.ef_unlabeled,
            ViewKind::LateFusion => &self.lf_unlabeled,
        }
    }

    pub fn n_labeled(&self) -> usize {
        self.labeled_ids.len()
    }

    pub fn n_unlabeled(&self) -> usize {
        self.unlabeled_ids.len()
    }
}

/// Per-class probabilities produced by a classifier; non-negative, sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceVector<F>(Array1<F>);

impl<F: Scalar> ConfidenceVector<F> {
    /// Wraps scores that the caller guarantees form a probability simplex.
    pub fn from_probabilities(scores: Array1<F>) -> Self {
        ConfidenceVector(scores)
    }

    pub fn scores(&self) -> ArrayView1<'_, F> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array1<F> {
        self.0
    }

    pub fn n_classes(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, class: ClassId) -> F {
        self.0[class.index()]
    }

    /// Most confident class and its score; ties go to the smallest class.
    pub fn pseudo_label(&self) -> (ClassId, F) {
        argmax_row(self.0.view())
    }
}

/// Index (as a class) and value of the largest entry; first index wins ties.
pub(crate) fn argmax_row<F: Scalar>(row: ArrayView1<'_, F>) -> (ClassId, F) {
    let mut best = 0;
    let mut best_v = row[0];
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    (ClassId::from_index(best), best_v)
}

/// A label assigned to an unlabeled sample by the other view's classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabel {
    pub sample_id: usize,
    pub label: ClassId,
    pub confidence: f64,
    pub source_view: ViewKind,
    pub round: usize,
    /// Whether the relaxed confidence rule admitted the sample.
    pub relaxed: bool,
}
