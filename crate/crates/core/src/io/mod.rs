//! File formats: feature matrices, dataset manifests, synthetic data and run reports.

pub mod manifest;
pub mod matrix;
pub mod report;
pub mod synthetic;

pub use manifest::{load_dataset, write_dataset, DatasetManifest, FeatureEntry, MatrixFormat};
pub use matrix::load_feature_matrix;
pub use report::{load_run_report, save_run_report, RunReport};
pub use synthetic::{generate_synthetic, Spread, SyntheticSpec};
