//! Early- and late-fusion views over learned projections.

use ndarray::{concatenate, Array2, Axis};

use crate::error::{Error, Result};
use crate::projection::{EpConfig, ProjectionEnsemble};
use crate::rng::{derive_seed, NS_EARLY_FUSION, NS_LATE_FUSION};
use crate::scalar::Scalar;
use crate::types::{MultiFeatureDataset, ViewPair};

/// Concatenates the raw features of every row, in feature order.
pub fn early_fuse<F: Scalar>(d: &MultiFeatureDataset<F>) -> Array2<F> {
    let views: Vec<_> = d.features.iter().map(|m| m.view()).collect();
    concatenate(Axis(1), &views).expect("validated dataset has equal row counts")
}

/// Splits `total` prototype sets over `features` features: `total / features`
/// each, with the remainder going one apiece to the first features.
pub fn allocate_prototype_budget(total: usize, features: usize) -> Result<Vec<usize>> {
    if features == 0 || total < features {
        return Err(Error::InvalidArgument(format!(
            "cannot split {total} prototype sets over {features} features"
        )));
    }
    let (base, extra) = (total / features, total % features);
    Ok((0..features).map(|s| base + usize::from(s < extra)).collect())
}

/// The fitted early-fusion ensemble and one late-fusion ensemble per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct UrlModel<F> {
    pub early: ProjectionEnsemble<F>,
    pub late: Vec<ProjectionEnsemble<F>>,
}

impl<F: Scalar> UrlModel<F> {
    /// Fits both representations on every row of `d`; labels are not read.
    ///
    /// Both fusions output `T·r` dimensions: the late-fusion budget of `T`
    /// prototype sets is split across features.
    pub fn fit(d: &MultiFeatureDataset<F>, ep: &EpConfig) -> Result<Self> {
        ep.validate()?;
        let budget = allocate_prototype_budget(ep.prototype_sets, d.n_features())?;
        let fused = early_fuse(d);
        let early_cfg = EpConfig {
            seed: derive_seed(ep.seed, &[NS_EARLY_FUSION]),
            ..*ep
        };
        let (early, late) = rayon::join(
            || ProjectionEnsemble::fit(fused.view(), &early_cfg),
            || {
                use rayon::prelude::*;
                d.features
                    .par_iter()
                    .zip(budget.par_iter())
                    .enumerate()
                    .map(|(s, (m, &sets))| {
                        let cfg = EpConfig {
                            prototype_sets: sets,
                            seed: derive_seed(ep.seed, &[NS_LATE_FUSION, s as u64]),
                            ..*ep
                        };
                        ProjectionEnsemble::fit(m.view(), &cfg)
                    })
                    .collect::<Result<Vec<_>>>()
            },
        );
        Ok(UrlModel {
            early: early?,
            late: late?,
        })
    }

    pub fn early_dim(&self) -> usize {
        self.early.output_dim()
    }

    pub fn late_dim(&self) -> usize {
        self.late.iter().map(|e| e.output_dim()).sum()
    }

    /// Early-fusion representation of the given rows of `d`.
    pub fn project_early(&self, d: &MultiFeatureDataset<F>, rows: &[usize]) -> Result<Array2<F>> {
        let fused = early_fuse(d).select(Axis(0), rows);
        self.early.project_batch(fused.view())
    }

    /// Late-fusion representation `[φ_1(x⁽¹⁾), …, φ_S(x⁽ˢ⁾)]` of the given rows.
    pub fn project_late(&self, d: &MultiFeatureDataset<F>, rows: &[usize]) -> Result<Array2<F>> {
        if d.n_features() != self.late.len() {
            return Err(Error::DimensionMismatch {
                expected: self.late.len(),
                found: d.n_features(),
            });
        }
        let parts = self
            .late
            .iter()
            .zip(&d.features)
            .map(|(ens, m)| ens.project_batch(m.select(Axis(0), rows).view()))
            .collect::<Result<Vec<_>>>()?;
        let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
        Ok(concatenate(Axis(1), &views).expect("equal row counts"))
    }

    pub fn views(
        &self,
        d: &MultiFeatureDataset<F>,
        labeled_ids: Vec<usize>,
        unlabeled_ids: Vec<usize>,
    ) -> Result<ViewPair<F>> {
        Ok(ViewPair {
            ef_labeled: self.project_early(d, &labeled_ids)?,
            ef_unlabeled: self.project_early(d, &unlabeled_ids)?,
            lf_labeled: self.project_late(d, &labeled_ids)?,
            lf_unlabeled: self.project_late(d, &unlabeled_ids)?,
            labeled_ids,
            unlabeled_ids,
        })
    }
}

/// Learns both representations on all rows of `d` and projects its labeled
/// and unlabeled pools.
pub fn compute_url<F: Scalar>(d: &MultiFeatureDataset<F>, ep: &EpConfig) -> Result<ViewPair<F>> {
    let labeled = d.labeled_indices();
    let unlabeled = d.unlabeled_indices();
    if labeled.is_empty() || unlabeled.is_empty() {
        return Err(Error::InvalidDataset(format!(
            "need labeled and unlabeled samples, found {} and {}",
            labeled.len(),
            unlabeled.len()
        )));
    }
    UrlModel::fit(d, ep)?.views(d, labeled, unlabeled)
}
