//! Ensemble Projection: unsupervised representation learning from sampled
//! prototype sets.
//!
//! Each ensemble member is trained on one prototype set of `r` pseudo-classes
//! with `n` samples each. Among `m` randomly drawn hypotheses the one whose
//! seeds are furthest apart (sum of pairwise Euclidean distances) is kept;
//! every seed is then grown into a prototype by its `n − 1` nearest unused
//! neighbours. A sample's representation is the concatenation of all member
//! probability vectors, `T·r` values in `T` simplex blocks.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logreg::{self, LogRegConfig, ProbClassifier};
use crate::rng::{self, NS_PROJECTION};
use crate::scalar::Scalar;
use crate::types::ClassId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpConfig {
    /// Number of prototype sets, i.e. ensemble members.
    pub prototype_sets: usize,
    pub prototypes_per_set: usize,
    pub samples_per_prototype: usize,
    /// Hypotheses drawn per prototype set; the most diverse is kept.
    pub hypotheses: usize,
    /// Z-score every input column with statistics from all fitting rows.
    pub standardize: bool,
    pub logreg: LogRegConfig,
    pub seed: u64,
}

impl Default for EpConfig {
    fn default() -> Self {
        EpConfig {
            prototype_sets: 300,
            prototypes_per_set: 30,
            samples_per_prototype: 6,
            hypotheses: 50,
            standardize: true,
            logreg: LogRegConfig::default(),
            seed: 0,
        }
    }
}

impl EpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.prototype_sets == 0 {
            return Err(Error::Config("prototype_sets must be at least 1".into()));
        }
        if self.prototypes_per_set < 2 {
            return Err(Error::Config("prototypes_per_set must be at least 2".into()));
        }
        if self.samples_per_prototype == 0 {
            return Err(Error::Config("samples_per_prototype must be at least 1".into()));
        }
        if self.hypotheses == 0 {
            return Err(Error::Config("hypotheses must be at least 1".into()));
        }
        self.logreg.validate()
    }

    /// Samples needed to build one prototype set.
    pub fn samples_per_set(&self) -> usize {
        self.prototypes_per_set * self.samples_per_prototype
    }

    pub fn output_dim(&self) -> usize {
        self.prototype_sets * self.prototypes_per_set
    }
}

/// `r·n` sample indices with their prototype pseudo-labels in `{1..r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet<F> {
    pub member_indices: Vec<usize>,
    pub member_labels: Vec<ClassId>,
    /// Seed sample of each prototype; `seeds[j]` carries label `j + 1`.
    pub seeds: Vec<usize>,
    /// Sum of pairwise Euclidean distances among the seeds.
    pub diversity: F,
}

fn euclidean<F: Scalar>(a: ArrayView1<'_, F>, b: ArrayView1<'_, F>) -> F {
    squared_distance(a, b).sqrt()
}

fn squared_distance<F: Scalar>(a: ArrayView1<'_, F>, b: ArrayView1<'_, F>) -> F {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Sum of pairwise Euclidean distances among the given rows.
pub fn diversity_score<F: Scalar>(data: ArrayView2<'_, F>, rows: &[usize]) -> F {
    let mut total = F::zero();
    for (i, &a) in rows.iter().enumerate() {
        for &b in &rows[i + 1..] {
            total += euclidean(data.row(a), data.row(b));
        }
    }
    total
}

fn check_capacity(n_rows: usize, prototypes: usize, per_prototype: usize) -> Result<()> {
    if prototypes == 0 || per_prototype == 0 {
        return Err(Error::InvalidArgument(
            "prototype count and size must be positive".into(),
        ));
    }
    let needed = prototypes * per_prototype;
    if n_rows < needed {
        return Err(Error::InvalidArgument(format!(
            "prototype set needs {needed} samples, only {n_rows} available"
        )));
    }
    Ok(())
}

fn draw_seeds<R: Rng + ?Sized>(n_rows: usize, prototypes: usize, rng: &mut R) -> Vec<usize> {
    rand::seq::index::sample(rng, n_rows, prototypes).into_vec()
}

/// Grows every seed into a prototype with its `per_prototype − 1` nearest
/// unused rows. Seeds are processed in order; distance ties go to the lower row.
pub fn expand_prototypes<F: Scalar>(
    data: ArrayView2<'_, F>,
    seeds: &[usize],
    per_prototype: usize,
) -> (Vec<usize>, Vec<ClassId>) {
    let mut used = vec![false; data.nrows()];
    for &s in seeds {
        used[s] = true;
    }
    let mut members = Vec::with_capacity(seeds.len() * per_prototype);
    let mut labels = Vec::with_capacity(seeds.len() * per_prototype);
    for (j, &seed) in seeds.iter().enumerate() {
        let mut candidates: Vec<(F, usize)> = (0..data.nrows())
            .filter(|&i| !used[i])
            .map(|i| (squared_distance(data.row(seed), data.row(i)), i))
            .collect();
        let take = per_prototype - 1;
        let by_distance = |a: &(F, usize), b: &(F, usize)| {
            a.0.partial_cmp(&b.0)
                .expect("finite distances")
                .then(a.1.cmp(&b.1))
        };
        if take > 0 && take < candidates.len() {
            candidates.select_nth_unstable_by(take - 1, by_distance);
            candidates.truncate(take);
        }
        candidates.sort_by(by_distance);
        members.push(seed);
        labels.push(ClassId::from_index(j));
        for &(_, i) in candidates.iter().take(take) {
            used[i] = true;
            members.push(i);
            labels.push(ClassId::from_index(j));
        }
    }
    (members, labels)
}

/// Draws one hypothesis: `prototypes` uniform seeds, each expanded to
/// `per_prototype` members.
pub fn sample_hypothesis<F: Scalar, R: Rng + ?Sized>(
    data: ArrayView2<'_, F>,
    prototypes: usize,
    per_prototype: usize,
    rng: &mut R,
) -> Result<PrototypeSet<F>> {
    check_capacity(data.nrows(), prototypes, per_prototype)?;
    let seeds = draw_seeds(data.nrows(), prototypes, rng);
    Ok(build_set(data, seeds, per_prototype))
}

fn build_set<F: Scalar>(data: ArrayView2<'_, F>, seeds: Vec<usize>, per_prototype: usize) -> PrototypeSet<F> {
    let diversity = diversity_score(data, &seeds);
    let (member_indices, member_labels) = expand_prototypes(data, &seeds, per_prototype);
    PrototypeSet {
        member_indices,
        member_labels,
        seeds,
        diversity,
    }
}

/// Keeps the most diverse of `hypotheses` sampled prototype sets.
pub fn select_prototype_set<F: Scalar, R: Rng + ?Sized>(
    data: ArrayView2<'_, F>,
    prototypes: usize,
    per_prototype: usize,
    hypotheses: usize,
    rng: &mut R,
) -> Result<PrototypeSet<F>> {
    select_prototype_set_scored(data, prototypes, per_prototype, hypotheses, rng).map(|(set, _)| set)
}

/// Like [`select_prototype_set`], also returning every hypothesis' diversity
/// score in sampling order.
///
/// Only the winning hypothesis is expanded; expansion draws no randomness, so
/// the result matches sampling every hypothesis in full.
pub fn select_prototype_set_scored<F: Scalar, R: Rng + ?Sized>(
    data: ArrayView2<'_, F>,
    prototypes: usize,
    per_prototype: usize,
    hypotheses: usize,
    rng: &mut R,
) -> Result<(PrototypeSet<F>, Vec<F>)> {
    check_capacity(data.nrows(), prototypes, per_prototype)?;
    if hypotheses == 0 {
        return Err(Error::InvalidArgument("at least one hypothesis required".into()));
    }
    let mut scores = Vec::with_capacity(hypotheses);
    let mut best: Option<(F, Vec<usize>)> = None;
    for _ in 0..hypotheses {
        let seeds = draw_seeds(data.nrows(), prototypes, rng);
        let score = diversity_score(data, &seeds);
        scores.push(score);
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, seeds));
        }
    }
    let (_, seeds) = best.expect("at least one hypothesis");
    Ok((build_set(data, seeds, per_prototype), scores))
}

/// Per-column z-scoring; zero-variance columns are only centred.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<F> {
    pub mean: Array1<F>,
    pub scale: Array1<F>,
}

impl<F: Scalar> Standardizer<F> {
    pub fn fit(data: ArrayView2<'_, F>) -> Self {
        let n = F::from_usize_lossy(data.nrows().max(1));
        let mean = data.sum_axis(Axis(0)) / n;
        let mut var = Array1::zeros(data.ncols());
        for row in data.axis_iter(Axis(0)) {
            for ((v, &x), &m) in var.iter_mut().zip(row).zip(&mean) {
                let d: F = x - m;
                *v += d * d;
            }
        }
        let scale = var.mapv(|v: F| {
            let sd = (v / n).sqrt();
            if sd > F::zero() {
                sd
            } else {
                F::one()
            }
        });
        Standardizer { mean, scale }
    }

    pub fn transform(&self, data: ArrayView2<'_, F>) -> Array2<F> {
        (&data - &self.mean) / &self.scale
    }
}

/// `T` trained members mapping `D_in` inputs to `T·r` outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionEnsemble<F> {
    members: Vec<ProbClassifier<F>>,
    prototype_sets: Vec<PrototypeSet<F>>,
    standardizer: Option<Standardizer<F>>,
    input_dim: usize,
}

impl<F: Scalar> ProjectionEnsemble<F> {
    /// Fits an ensemble on every row of `data`. Labels are never consulted.
    ///
    /// Member `t` draws from its own random stream derived from
    /// `(config.seed, t)`, so members are trained in parallel and the result
    /// is identical to sequential fitting.
    pub fn fit(data: ArrayView2<'_, F>, config: &EpConfig) -> Result<Self> {
        config.validate()?;
        check_capacity(data.nrows(), config.prototypes_per_set, config.samples_per_prototype)?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("projection input"));
        }
        let standardizer = config.standardize.then(|| Standardizer::fit(data));
        let work = match &standardizer {
            Some(st) => st.transform(data),
            None => data.to_owned(),
        };

        let fitted: Vec<(PrototypeSet<F>, ProbClassifier<F>)> = (0..config.prototype_sets)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng::stream(config.seed, &[NS_PROJECTION, t as u64]);
                let set = select_prototype_set(
                    work.view(),
                    config.prototypes_per_set,
                    config.samples_per_prototype,
                    config.hypotheses,
                    &mut rng,
                )?;
                let x = work.select(Axis(0), &set.member_indices);
                let clf = logreg::train(x.view(), &set.member_labels, config.prototypes_per_set, &config.logreg)?;
                Ok((set, clf))
            })
            .collect::<Result<_>>()?;
        let (prototype_sets, members) = fitted.into_iter().unzip();

        Ok(ProjectionEnsemble {
            members,
            prototype_sets,
            standardizer,
            input_dim: data.ncols(),
        })
    }

    /// Assembles an ensemble from already trained members, without input scaling.
    pub fn from_members(members: Vec<ProbClassifier<F>>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidArgument("ensemble needs at least one member".into()))?;
        let (input_dim, width) = (first.input_dim(), first.n_classes());
        if let Some(bad) = members.iter().find(|m| m.input_dim() != input_dim || m.n_classes() != width) {
            return Err(Error::DimensionMismatch {
                expected: input_dim,
                found: bad.input_dim(),
            });
        }
        Ok(ProjectionEnsemble {
            members,
            prototype_sets: Vec::new(),
            standardizer: None,
            input_dim,
        })
    }

    pub fn members(&self) -> &[ProbClassifier<F>] {
        &self.members
    }

    /// Prototype sets the members were trained on (empty for assembled ensembles).
    pub fn prototype_sets(&self) -> &[PrototypeSet<F>] {
        &self.prototype_sets
    }

    pub fn standardizer(&self) -> Option<&Standardizer<F>> {
        self.standardizer.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Width of each member's output block.
    pub fn block_size(&self) -> usize {
        self.members[0].n_classes()
    }

    pub fn output_dim(&self) -> usize {
        self.members.len() * self.block_size()
    }

    pub fn project(&self, x: ArrayView1<'_, F>) -> Result<Array1<F>> {
        let out = self.project_batch(x.insert_axis(Axis(0)))?;
        Ok(out.index_axis_move(Axis(0), 0))
    }

    /// Projects every row of `x`; block `t` of each output row holds member
    /// `t`'s class probabilities.
    pub fn project_batch(&self, x: ArrayView2<'_, F>) -> Result<Array2<F>> {
        if x.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.ncols(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("projection input"));
        }
        let scaled;
        let input = match &self.standardizer {
            Some(st) => {
                scaled = st.transform(x);
                scaled.view()
            }
            None => x,
        };
        let width = self.block_size();
        let mut out = Array2::zeros((x.nrows(), self.output_dim()));
        out.axis_chunks_iter_mut(Axis(1), width)
            .into_par_iter()
            .zip(self.members.par_iter())
            .for_each(|(block, member)| member.predict_proba_into(input, block));
        Ok(out)
    }
}

/// Splits a projected row into its per-member blocks.
pub fn blocks<F>(row: ArrayView1<'_, F>, width: usize) -> impl Iterator<Item = ArrayView1<'_, F>> {
    let n = row.len() / width;
    (0..n).map(move |t| row.slice_move(s![t * width..(t + 1) * width]))
}
