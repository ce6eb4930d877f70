//! Evaluation scenarios and (mean) average precision.

use std::cmp::Ordering;
use std::fmt;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{ClassId, MultiFeatureDataset};

/// How unlabeled data is used for training versus testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// A quarter of the unlabeled pool trains, the rest is a held-out test set.
    Inductive,
    /// The whole unlabeled pool is used for training and for testing.
    Transductive,
    /// Unlabeled training data comes from an external dataset; the whole
    /// original unlabeled pool is the test set.
    SelfTaught,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Inductive => "inductive",
            ScenarioKind::Transductive => "transductive",
            ScenarioKind::SelfTaught => "self_taught",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolSource {
    Original,
    External,
}

/// Row ids for one random labeled/unlabeled split. All id lists are ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioSplit {
    pub kind: ScenarioKind,
    /// Rows of the original dataset whose labels are revealed.
    pub labeled: Vec<usize>,
    /// Unlabeled training rows, indexing the dataset named by `train_unlabeled_source`.
    pub train_unlabeled: Vec<usize>,
    pub train_unlabeled_source: PoolSource,
    /// Rows of the original dataset used for scoring.
    pub test: Vec<usize>,
}

/// Size of the inductive training share: a quarter of the pool, rounded half up.
pub fn inductive_train_size(pool: usize) -> usize {
    (pool + 2) / 4
}

/// Draws `labels_per_class` labeled rows per class; every other row with a
/// ground-truth label forms the unlabeled pool, split according to `kind`.
///
/// Rows without a ground-truth label cannot be scored and are left out.
pub fn split_scenario<F: Scalar, R: Rng + ?Sized>(
    d: &MultiFeatureDataset<F>,
    kind: ScenarioKind,
    labels_per_class: usize,
    external: Option<&MultiFeatureDataset<F>>,
    rng: &mut R,
) -> Result<ScenarioSplit> {
    if labels_per_class == 0 {
        return Err(Error::InvalidArgument("labels_per_class must be at least 1".into()));
    }
    let mut labeled = Vec::with_capacity(labels_per_class * d.n_classes);
    for k in 1..=d.n_classes {
        let rows: Vec<usize> = d
            .labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| (l.map(ClassId::get) == Some(k)).then_some(i))
            .collect();
        if rows.len() < labels_per_class {
            return Err(Error::InsufficientSamples {
                class: d.class_names.get(k - 1).cloned().unwrap_or_else(|| k.to_string()),
                available: rows.len(),
                required: labels_per_class,
            });
        }
        labeled.extend(rand::seq::index::sample(rng, rows.len(), labels_per_class).into_iter().map(|i| rows[i]));
    }
    labeled.sort_unstable();

    let mut is_labeled = vec![false; d.n_samples()];
    for &i in &labeled {
        is_labeled[i] = true;
    }
    let pool: Vec<usize> = (0..d.n_samples())
        .filter(|&i| !is_labeled[i] && d.labels[i].is_some())
        .collect();
    if pool.is_empty() {
        return Err(Error::InvalidDataset("no unlabeled samples remain after drawing labels".into()));
    }

    let (train_unlabeled, source, test) = match kind {
        ScenarioKind::Inductive => {
            let n_train = inductive_train_size(pool.len());
            if n_train == 0 || n_train == pool.len() {
                return Err(Error::InvalidDataset(format!(
                    "unlabeled pool of {} is too small for an inductive split",
                    pool.len()
                )));
            }
            let mut shuffled = pool;
            shuffled.shuffle(rng);
            let mut test = shuffled.split_off(n_train);
            shuffled.sort_unstable();
            test.sort_unstable();
            (shuffled, PoolSource::Original, test)
        }
        ScenarioKind::Transductive => (pool.clone(), PoolSource::Original, pool),
        ScenarioKind::SelfTaught => {
            let ext = external.ok_or_else(|| {
                Error::InvalidArgument("self-taught scenario needs an external dataset".into())
            })?;
            if ext.n_samples() == 0 {
                return Err(Error::InvalidDataset("external dataset is empty".into()));
            }
            ((0..ext.n_samples()).collect(), PoolSource::External, pool)
        }
    };
    Ok(ScenarioSplit {
        kind,
        labeled,
        train_unlabeled,
        train_unlabeled_source: source,
        test,
    })
}

/// Ranking by descending score; ties go to the lower index.
fn ranking<F: Scalar>(scores: impl Fn(usize) -> F, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores(b)
            .partial_cmp(&scores(a))
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

fn ap_of_ranking<F: Scalar>(order: &[usize], positive: impl Fn(usize) -> bool) -> Option<F> {
    let mut hits = 0usize;
    let mut total = F::zero();
    for (rank, &i) in order.iter().enumerate() {
        if positive(i) {
            hits += 1;
            total += F::from_usize_lossy(hits) / F::from_usize_lossy(rank + 1);
        }
    }
    (hits > 0).then(|| total / F::from_usize_lossy(hits))
}

/// Non-interpolated average precision: the mean, over positive items, of the
/// precision at that item's rank.
pub fn average_precision<F: Scalar>(scores: &[F], positives: &[bool]) -> Result<F> {
    if scores.len() != positives.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: positives.len(),
        });
    }
    let order = ranking(|i| scores[i], scores.len());
    ap_of_ranking(&order, |i| positives[i])
        .ok_or_else(|| Error::InvalidArgument("average precision needs at least one positive".into()))
}

/// Mean over classes of the average precision of each score column against
/// one-vs-rest ground truth.
pub fn mean_average_precision<F: Scalar>(scores: ArrayView2<'_, F>, truth: &[ClassId]) -> Result<F> {
    if scores.nrows() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.nrows(),
            found: truth.len(),
        });
    }
    let n_classes = scores.ncols();
    if n_classes == 0 {
        return Err(Error::InvalidArgument("score matrix has no classes".into()));
    }
    let mut total = F::zero();
    for c in 0..n_classes {
        let column = scores.column(c);
        let order = ranking(|i| column[i], truth.len());
        total += ap_of_ranking(&order, |i| truth[i].index() == c).ok_or(Error::NoPositives(c + 1))?;
    }
    Ok(total / F::from_usize_lossy(n_classes))
}
