//! Co-training of the early- and late-fusion classifiers.
//!
//! Every round both classifiers score the unlabeled pool once. Then, for each
//! class `k` and each direction (EF receives from LF, LF receives from EF),
//! the donor view nominates unlabeled samples it labels `k`:
//!
//! * primary rule: donor confidence for `k` exceeds `t1` and exceeds the
//!   receiver's confidence for `k`;
//! * relaxed rule, used only when the primary rule finds nothing: donor
//!   confidence for `k` exceeds `t2`.
//!
//! With non-maximum suppression only the most confident candidate is added;
//! the add-all variant adds every primary-rule candidate and never relaxes.
//! Both classifiers are then retrained from scratch on their grown sets.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::compute_url;
use crate::logreg::{self, LogRegConfig, ProbClassifier};
use crate::projection::EpConfig;
use crate::scalar::Scalar;
use crate::types::{argmax_row, ClassId, ConfidenceVector, MultiFeatureDataset, PseudoLabel, ViewKind, ViewPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// One addition per class, view and round.
    Nms,
    /// Every primary-rule candidate is added.
    AddAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CotrainConfig {
    pub rounds: usize,
    pub t1: f64,
    pub t2: f64,
    pub variant: Variant,
    /// Settings for the two co-trained classifiers.
    pub classifier: LogRegConfig,
}

impl Default for CotrainConfig {
    fn default() -> Self {
        CotrainConfig {
            rounds: 5,
            t1: 0.7,
            t2: 0.4,
            variant: Variant::Nms,
            classifier: LogRegConfig::default(),
        }
    }
}

impl CotrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t1 <= 1.0) {
            return Err(Error::Config(format!("t1 must lie in (0, 1], got {}", self.t1)));
        }
        if !(self.t2 > 0.0 && self.t2 < 1.0) {
            return Err(Error::Config(format!("t2 must lie in (0, 1), got {}", self.t2)));
        }
        if self.t2 >= self.t1 {
            return Err(Error::Config(format!(
                "t2 ({}) must be below t1 ({})",
                self.t2, self.t1
            )));
        }
        self.classifier.validate()
    }
}

/// Most confident class of `w`; ties go to the smallest class.
pub fn pseudo_label<F: Scalar>(w: &ConfidenceVector<F>) -> (ClassId, F) {
    w.pseudo_label()
}

/// Both views' scores on the unlabeled pool, taken once at round start.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSnapshot<F> {
    pub ef: Array2<F>,
    pub lf: Array2<F>,
    pub ef_labels: Vec<ClassId>,
    pub lf_labels: Vec<ClassId>,
}

impl<F: Scalar> ScoreSnapshot<F> {
    /// Wraps `U×K` probability matrices and derives the pseudo-labels.
    pub fn new(ef: Array2<F>, lf: Array2<F>) -> Self {
        let labels = |m: &Array2<F>| m.axis_iter(Axis(0)).map(|r| argmax_row(r).0).collect();
        ScoreSnapshot {
            ef_labels: labels(&ef),
            lf_labels: labels(&lf),
            ef,
            lf,
        }
    }

    pub fn scores(&self, view: ViewKind) -> ArrayView2<'_, F> {
        match view {
            ViewKind::EarlyFusion => self.ef.view(),
            ViewKind::LateFusion => self.lf.view(),
        }
    }

    pub fn labels(&self, view: ViewKind) -> &[ClassId] {
        match view {
            ViewKind::EarlyFusion => &self.ef_labels,
            ViewKind::LateFusion => &self.lf_labels,
        }
    }
}

/// Unlabeled-pool positions admitted for one class and direction.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CandidateSet {
    pub positions: Vec<usize>,
    /// The relaxed rule produced this set.
    pub relaxed: bool,
}

/// Positions satisfying the primary rule for class `k`.
pub fn primary_candidates<F: Scalar>(
    k: ClassId,
    receiver: ArrayView2<'_, F>,
    donor: ArrayView2<'_, F>,
    donor_labels: &[ClassId],
    already_in_receiver: &[bool],
    t1: F,
) -> Vec<usize> {
    let c = k.index();
    (0..donor.nrows())
        .filter(|&i| {
            !already_in_receiver[i]
                && donor_labels[i] == k
                && receiver[[i, c]] < donor[[i, c]]
                && donor[[i, c]] > t1
        })
        .collect()
}

/// Candidates for class `k`: the primary rule, or the relaxed rule if the
/// primary rule admits nothing.
pub fn select_candidates<F: Scalar>(
    k: ClassId,
    receiver: ArrayView2<'_, F>,
    donor: ArrayView2<'_, F>,
    donor_labels: &[ClassId],
    already_in_receiver: &[bool],
    t1: F,
    t2: F,
) -> CandidateSet {
    let primary = primary_candidates(k, receiver, donor, donor_labels, already_in_receiver, t1);
    if !primary.is_empty() {
        return CandidateSet {
            positions: primary,
            relaxed: false,
        };
    }
    let c = k.index();
    let positions = (0..donor.nrows())
        .filter(|&i| !already_in_receiver[i] && donor_labels[i] == k && donor[[i, c]] > t2)
        .collect();
    CandidateSet {
        positions,
        relaxed: true,
    }
}

/// The candidate with the highest donor score for class `k`; ties go to the
/// smallest sample id.
pub fn non_max_suppression<F: Scalar>(
    candidates: &[usize],
    donor: ArrayView2<'_, F>,
    k: ClassId,
    sample_ids: &[usize],
) -> Option<usize> {
    let c = k.index();
    candidates.iter().copied().reduce(|best, i| {
        let (a, b) = (donor[[best, c]], donor[[i, c]]);
        if b > a || (b == a && sample_ids[i] < sample_ids[best]) {
            i
        } else {
            best
        }
    })
}

/// Pseudo-labeled additions to one view.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ViewLedger {
    /// Membership flag per unlabeled-pool position.
    pub in_training: Vec<bool>,
    /// Unlabeled-pool position of each entry in `labels`.
    pub positions: Vec<usize>,
    pub labels: Vec<PseudoLabel>,
}

impl ViewLedger {
    fn new(pool: usize) -> Self {
        ViewLedger {
            in_training: vec![false; pool],
            positions: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn add(&mut self, position: usize, label: PseudoLabel) {
        debug_assert!(!self.in_training[position]);
        self.in_training[position] = true;
        self.positions.push(position);
        self.labels.push(label);
    }
}

/// One addition decided during a round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Addition {
    pub view: ViewKind,
    pub position: usize,
    pub label: PseudoLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord<F> {
    pub round: usize,
    pub additions: Vec<Addition>,
    pub snapshot: ScoreSnapshot<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CotrainState<F> {
    /// Rounds completed so far.
    pub round: usize,
    pub ef: ViewLedger,
    pub lf: ViewLedger,
    pub history: Vec<RoundRecord<F>>,
}

impl<F: Scalar> CotrainState<F> {
    pub fn new(pool: usize) -> Self {
        CotrainState {
            round: 0,
            ef: ViewLedger::new(pool),
            lf: ViewLedger::new(pool),
            history: Vec::new(),
        }
    }

    pub fn ledger(&self, view: ViewKind) -> &ViewLedger {
        match view {
            ViewKind::EarlyFusion => &self.ef,
            ViewKind::LateFusion => &self.lf,
        }
    }

    fn ledger_mut(&mut self, view: ViewKind) -> &mut ViewLedger {
        match view {
            ViewKind::EarlyFusion => &mut self.ef,
            ViewKind::LateFusion => &mut self.lf,
        }
    }
}

const DIRECTIONS: [(ViewKind, ViewKind); 2] = [
    (ViewKind::EarlyFusion, ViewKind::LateFusion),
    (ViewKind::LateFusion, ViewKind::EarlyFusion),
];

/// Decides one round's additions from a score snapshot and applies them to
/// the ledgers. `sample_ids` maps unlabeled-pool positions to sample ids.
pub fn apply_round_selection<F: Scalar>(
    state: &mut CotrainState<F>,
    snapshot: &ScoreSnapshot<F>,
    sample_ids: &[usize],
    config: &CotrainConfig,
) -> Vec<Addition> {
    let n_classes = snapshot.ef.ncols();
    let round = state.round + 1;
    let (t1, t2) = (F::lit(config.t1), F::lit(config.t2));
    let mut additions = Vec::new();
    for k in (0..n_classes).map(ClassId::from_index) {
        for (receiver, donor) in DIRECTIONS {
            let donor_scores = snapshot.scores(donor);
            let taken = &state.ledger(receiver).in_training;
            let chosen: Vec<(usize, bool)> = match config.variant {
                Variant::Nms => {
                    let cands = select_candidates(
                        k,
                        snapshot.scores(receiver),
                        donor_scores,
                        snapshot.labels(donor),
                        taken,
                        t1,
                        t2,
                    );
                    non_max_suppression(&cands.positions, donor_scores, k, sample_ids)
                        .map(|p| (p, cands.relaxed))
                        .into_iter()
                        .collect()
                }
                Variant::AddAll => primary_candidates(
                    k,
                    snapshot.scores(receiver),
                    donor_scores,
                    snapshot.labels(donor),
                    taken,
                    t1,
                )
                .into_iter()
                .map(|p| (p, false))
                .collect(),
            };
            for (position, relaxed) in chosen {
                let label = PseudoLabel {
                    sample_id: sample_ids[position],
                    label: k,
                    confidence: donor_scores[[position, k.index()]].as_f64(),
                    source_view: donor,
                    round,
                    relaxed,
                };
                state.ledger_mut(receiver).add(position, label);
                additions.push(Addition {
                    view: receiver,
                    position,
                    label,
                });
            }
        }
    }
    additions
}

/// Trains `view`'s classifier on its labeled rows plus its pseudo-labeled rows.
fn train_view<F: Scalar>(
    views: &ViewPair<F>,
    labels: &[ClassId],
    n_classes: usize,
    config: &LogRegConfig,
    state: &CotrainState<F>,
    view: ViewKind,
) -> Result<ProbClassifier<F>> {
    let ledger = state.ledger(view);
    let pseudo = views.unlabeled(view).select(Axis(0), &ledger.positions);
    let x = ndarray::concatenate(Axis(0), &[views.labeled(view).view(), pseudo.view()])
        .expect("views share a width");
    let mut y = labels.to_vec();
    y.extend(ledger.labels.iter().map(|p| p.label));
    logreg::train(x.view(), &y, n_classes, config)
}

/// Drives co-training over a fixed pair of views.
#[derive(Debug, Clone)]
pub struct Cotrainer<'a, F> {
    views: &'a ViewPair<F>,
    labels: &'a [ClassId],
    n_classes: usize,
    config: CotrainConfig,
    ef: ProbClassifier<F>,
    lf: ProbClassifier<F>,
    state: CotrainState<F>,
}

/// Trains the supervised baseline: a classifier on the labeled early-fusion rows.
pub fn train_baseline<F: Scalar>(
    views: &ViewPair<F>,
    labels: &[ClassId],
    n_classes: usize,
    config: &LogRegConfig,
) -> Result<ProbClassifier<F>> {
    logreg::train(views.ef_labeled.view(), labels, n_classes, config)
}

fn check_class_coverage(labels: &[ClassId], n_classes: usize) -> Result<()> {
    for k in 1..=n_classes {
        if !labels.iter().any(|l| l.get() == k) {
            return Err(Error::InsufficientSamples {
                class: k.to_string(),
                available: 0,
                required: 1,
            });
        }
    }
    Ok(())
}

impl<'a, F: Scalar> Cotrainer<'a, F> {
    /// Trains the initial classifiers on the labeled rows of each view.
    pub fn new(views: &'a ViewPair<F>, labels: &'a [ClassId], n_classes: usize, config: CotrainConfig) -> Result<Self> {
        config.validate()?;
        if labels.len() != views.n_labeled() {
            return Err(Error::DimensionMismatch {
                expected: views.n_labeled(),
                found: labels.len(),
            });
        }
        check_class_coverage(labels, n_classes)?;
        let state = CotrainState::new(views.n_unlabeled());
        let (ef, lf) = rayon::join(
            || train_view(views, labels, n_classes, &config.classifier, &state, ViewKind::EarlyFusion),
            || train_view(views, labels, n_classes, &config.classifier, &state, ViewKind::LateFusion),
        );
        Ok(Cotrainer {
            views,
            labels,
            n_classes,
            config,
            ef: ef?,
            lf: lf?,
            state,
        })
    }

    fn train_view(&self, view: ViewKind) -> Result<ProbClassifier<F>> {
        train_view(self.views, self.labels, self.n_classes, &self.config.classifier, &self.state, view)
    }

    pub fn classifier(&self, view: ViewKind) -> &ProbClassifier<F> {
        match view {
            ViewKind::EarlyFusion => &self.ef,
            ViewKind::LateFusion => &self.lf,
        }
    }

    pub fn state(&self) -> &CotrainState<F> {
        &self.state
    }

    pub fn config(&self) -> &CotrainConfig {
        &self.config
    }

    /// Runs one co-training round and returns its record.
    pub fn step(&mut self) -> Result<&RoundRecord<F>> {
        let (ef, lf) = rayon::join(
            || self.ef.predict_proba_batch(self.views.ef_unlabeled.view()),
            || self.lf.predict_proba_batch(self.views.lf_unlabeled.view()),
        );
        let snapshot = ScoreSnapshot::new(ef?, lf?);
        let additions = apply_round_selection(&mut self.state, &snapshot, &self.views.unlabeled_ids, &self.config);

        // Retraining an unchanged set reproduces the same classifier.
        let grew = |v: ViewKind| additions.iter().any(|a| a.view == v);
        let (grew_ef, grew_lf) = (grew(ViewKind::EarlyFusion), grew(ViewKind::LateFusion));
        let (ef, lf) = rayon::join(
            || grew_ef.then(|| self.train_view(ViewKind::EarlyFusion)).transpose(),
            || grew_lf.then(|| self.train_view(ViewKind::LateFusion)).transpose(),
        );
        if let Some(c) = ef? {
            self.ef = c;
        }
        if let Some(c) = lf? {
            self.lf = c;
        }

        self.state.round += 1;
        self.state.history.push(RoundRecord {
            round: self.state.round,
            additions,
            snapshot,
        });
        Ok(self.state.history.last().expect("just pushed"))
    }

    /// Runs all configured rounds.
    pub fn run(mut self) -> Result<(ProbClassifier<F>, ProbClassifier<F>, CotrainState<F>)> {
        for _ in 0..self.config.rounds {
            self.step()?;
        }
        Ok((self.ef, self.lf, self.state))
    }
}

#[derive(Debug, Clone)]
pub struct CurlOutcome<F> {
    pub ef: ProbClassifier<F>,
    pub lf: ProbClassifier<F>,
    pub state: CotrainState<F>,
    pub views: ViewPair<F>,
}

/// Full pipeline on a dataset: learns both views from all rows, then
/// co-trains for `ct.rounds` rounds.
pub fn run_curl<F: Scalar>(d: &MultiFeatureDataset<F>, ep: &EpConfig, ct: &CotrainConfig) -> Result<CurlOutcome<F>> {
    ct.validate()?;
    let report = d.validate();
    if let Some(v) = report.first() {
        return Err(Error::InvalidDataset(v.to_string()));
    }
    let labels: Vec<ClassId> = d.labels.iter().flatten().copied().collect();
    check_class_coverage(&labels, d.n_classes)?;
    let views = compute_url(d, ep)?;
    let (ef, lf, state) = Cotrainer::new(&views, &labels, d.n_classes, *ct)?.run()?;
    Ok(CurlOutcome { ef, lf, state, views })
}

/// Mean of the two views' class probabilities.
pub fn combine_predict<F: Scalar>(
    ef: &ProbClassifier<F>,
    lf: &ProbClassifier<F>,
    x_ef: ArrayView1<'_, F>,
    x_lf: ArrayView1<'_, F>,
) -> Result<ConfidenceVector<F>> {
    let a = ef.predict_proba(x_ef)?.into_inner();
    let b = lf.predict_proba(x_lf)?.into_inner();
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(ConfidenceVector::from_probabilities((a + b) * F::lit(0.5)))
}

/// Row-wise [`combine_predict`].
pub fn combine_predict_batch<F: Scalar>(
    ef: &ProbClassifier<F>,
    lf: &ProbClassifier<F>,
    x_ef: ArrayView2<'_, F>,
    x_lf: ArrayView2<'_, F>,
) -> Result<Array2<F>> {
    let a = ef.predict_proba_batch(x_ef)?;
    let b = lf.predict_proba_batch(x_lf)?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            found: b.ncols(),
        });
    }
    Ok((a + b) * F::lit(0.5))
}
