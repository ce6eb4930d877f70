//! Semi-supervised classification by co-training two classifiers over
//! early-fused and late-fused unsupervised representations.
//!
//! The representations are learned with Ensemble Projection: many small
//! prototype sets are sampled from all data, a softmax classifier is trained
//! to discriminate each set, and samples are represented by the concatenated
//! classifier outputs. Two views are built from the raw features:
//!
//! * **early fusion** (EF): one ensemble on the concatenated raw features;
//! * **late fusion** (LF): one ensemble per raw feature, outputs concatenated.
//!
//! A classifier per view is then co-trained, each pseudo-labeling confident
//! unlabeled samples for the other.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the type
//! aliases below fix the common `f64` instantiation.

pub mod cotrain;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod fusion;
pub mod io;
pub mod lbfgs;
pub mod logreg;
pub mod projection;
pub mod rng;
pub mod scalar;
pub mod types;

pub use cotrain::{CotrainConfig, CotrainState, Cotrainer, CurlOutcome, Variant};
pub use error::{Error, Result};
pub use eval::{ScenarioKind, ScenarioSplit};
pub use experiment::{ExperimentConfig, VariantName};
pub use fusion::UrlModel;
pub use logreg::{LogRegConfig, ProbClassifier};
pub use projection::{EpConfig, PrototypeSet, ProjectionEnsemble};
pub use scalar::Scalar;
pub use types::{ClassId, ConfidenceVector, MultiFeatureDataset, PseudoLabel, ViewKind, ViewPair};

pub type Dataset = MultiFeatureDataset<f64>;
pub type Dataset32 = MultiFeatureDataset<f32>;
pub type Classifier = ProbClassifier<f64>;
pub type Classifier32 = ProbClassifier<f32>;
pub type Ensemble = ProjectionEnsemble<f64>;
pub type Ensemble32 = ProjectionEnsemble<f32>;
pub type Views = ViewPair<f64>;
pub type Views32 = ViewPair<f32>;
