//! Seeded multi-view Gaussian class data.
//!
//! Each class gets one mean per view. With `view_correlation = 0` the per-view
//! means are drawn independently; with `1` they are a single class latent
//! vector pushed through a random projection per view. Intermediate values mix
//! the two with weights `sqrt(1 − ρ)` and `sqrt(ρ)`, which keeps the mean
//! variance at `spread²`. Samples add isotropic Gaussian noise of scale `noise`.
//!
//! `spread` is either one number for all views or a list with one entry per
//! view, so views can differ in how informative they are.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng as ChaRng;
use crate::scalar::Scalar;
use crate::types::{ClassId, MultiFeatureDataset};
use rand::SeedableRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    /// Feature width per view; its length is the number of views.
    pub dims: Vec<usize>,
    pub samples_per_class: usize,
    /// Standard deviation of the class means.
    pub spread: Spread,
    /// Standard deviation of the per-sample noise.
    pub noise: f64,
    #[serde(default)]
    pub view_correlation: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Spread {
    Uniform(f64),
    PerView(Vec<f64>),
}

impl Spread {
    pub fn for_view(&self, view: usize) -> f64 {
        match self {
            Spread::Uniform(v) => *v,
            Spread::PerView(v) => v[view],
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            Spread::Uniform(v) => std::slice::from_ref(v),
            Spread::PerView(v) => v,
        }
    }
}

impl From<f64> for Spread {
    fn from(v: f64) -> Self {
        Spread::Uniform(v)
    }
}

impl From<Vec<f64>> for Spread {
    fn from(v: Vec<f64>) -> Self {
        Spread::PerView(v)
    }
}

impl SyntheticSpec {
    /// Reads a TOML or JSON spec file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let spec: SyntheticSpec = crate::experiment::parse_document(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.samples_per_class == 0 {
            return Err(Error::Config("classes and samples_per_class must be at least 1".into()));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::Config("every view needs at least one dimension".into()));
        }
        if let Spread::PerView(v) = &self.spread {
            if v.len() != self.dims.len() {
                return Err(Error::Config(format!("{} spreads given for {} views", v.len(), self.dims.len())));
            }
        }
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !(self.spread.values().iter().all(|&v| ok(v)) && ok(self.noise)) {
            return Err(Error::Config("spread and noise must be finite and non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.view_correlation) {
            return Err(Error::Config(format!(
                "view_correlation must lie in [0, 1], got {}",
                self.view_correlation
            )));
        }
        Ok(())
    }
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Generates a fully labeled dataset, rows grouped by class.
pub fn generate_synthetic<F: Scalar>(spec: &SyntheticSpec) -> Result<MultiFeatureDataset<F>> {
    spec.validate()?;
    let mut rng = ChaRng::seed_from_u64(spec.seed);
    let latent_dim = *spec.dims.iter().min().expect("non-empty");
    let (w_indep, w_shared) = ((1.0 - spec.view_correlation).sqrt(), spec.view_correlation.sqrt());

    let latents: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| (0..latent_dim).map(|_| normal(&mut rng)).collect())
        .collect();
    let scale = 1.0 / (latent_dim as f64).sqrt();
    let projections: Vec<Array2<f64>> = spec
        .dims
        .iter()
        .map(|&d| Array2::from_shape_simple_fn((d, latent_dim), || normal(&mut rng) * scale))
        .collect();
    // means[s] is K x d_s
    let means: Vec<Array2<f64>> = spec
        .dims
        .iter()
        .zip(&projections)
        .enumerate()
        .map(|(s, (&d, proj))| {
            let spread = spec.spread.for_view(s);
            let mut m = Array2::zeros((spec.classes, d));
            for (k, z) in latents.iter().enumerate() {
                let shared = proj.dot(&ndarray::ArrayView1::from(z.as_slice()));
                for j in 0..d {
                    m[[k, j]] = spread * (w_indep * normal(&mut rng) + w_shared * shared[j]);
                }
            }
            m
        })
        .collect();

    let n = spec.classes * spec.samples_per_class;
    let mut features: Vec<Array2<F>> = spec.dims.iter().map(|&d| Array2::zeros((n, d))).collect();
    let mut labels = Vec::with_capacity(n);
    for k in 0..spec.classes {
        for i in 0..spec.samples_per_class {
            let row = k * spec.samples_per_class + i;
            for (feat, mean) in features.iter_mut().zip(&means) {
                for j in 0..feat.ncols() {
                    feat[[row, j]] = F::lit(mean[[k, j]] + spec.noise * normal(&mut rng));
                }
            }
            labels.push(Some(ClassId::from_index(k)));
        }
    }
    let names = (1..=spec.dims.len()).map(|s| format!("view{s}")).collect();
    Ok(MultiFeatureDataset::new(features, names, labels, spec.classes))
}
