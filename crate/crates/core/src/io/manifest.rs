//! Dataset manifests: a JSON file naming the feature matrices and labels.
//!
//! ```json
//! {
//!   "name": "scene15",
//!   "version": 1,
//!   "features": [{"name": "gist", "path": "gist.csv", "dim": 512}],
//!   "labels": "labels.txt"
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::{load_feature_matrix, load_label_tokens, write_feature_matrix_binary, write_feature_matrix_csv};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{ClassId, MultiFeatureDataset};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureEntry {
    pub name: String,
    pub path: PathBuf,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    #[serde(default = "default_version")]
    pub version: u32,
    pub features: Vec<FeatureEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
}

fn default_version() -> u32 {
    MANIFEST_VERSION
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        m.check(path)?;
        Ok(m)
    }

    fn check(&self, path: &Path) -> Result<()> {
        let bad = |message: String| {
            Err(Error::Format {
                path: path.to_path_buf(),
                message,
            })
        };
        if self.version != MANIFEST_VERSION {
            return bad(format!("unsupported manifest version {}", self.version));
        }
        if self.features.is_empty() {
            return bad("manifest lists no features".into());
        }
        for (i, f) in self.features.iter().enumerate() {
            if self.features[..i].iter().any(|g| g.name == f.name) {
                return bad(format!("duplicate feature name '{}'", f.name));
            }
            if f.dim == 0 {
                return bad(format!("feature '{}' declares dimension 0", f.name));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Maps label tokens to `{1..K}`. Classes are numbered in ascending numeric
/// order when every token is an integer, otherwise in lexicographic order.
pub fn remap_labels(tokens: &[Option<String>]) -> (Vec<Option<ClassId>>, Vec<String>) {
    let mut names: Vec<String> = tokens.iter().flatten().cloned().collect();
    names.sort();
    names.dedup();
    let numeric: Option<Vec<i64>> = names.iter().map(|n| n.parse().ok()).collect();
    if let Some(nums) = numeric {
        let mut pairs: Vec<(i64, String)> = nums.into_iter().zip(names).collect();
        pairs.sort();
        names = pairs.into_iter().map(|(_, n)| n).collect();
    }
    let labels = tokens
        .iter()
        .map(|t| {
            t.as_ref()
                .map(|t| ClassId::from_index(names.iter().position(|n| n == t).expect("collected above")))
        })
        .collect();
    (labels, names)
}

/// Loads every feature named in the manifest plus the optional labels.
pub fn load_dataset<F: Scalar>(manifest_path: &Path) -> Result<MultiFeatureDataset<F>> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let features = manifest
        .features
        .par_iter()
        .map(|f| load_feature_matrix::<F>(&resolve(base, &f.path), Some(f.dim)))
        .collect::<Result<Vec<_>>>()?;
    let first = &manifest.features[0];
    let n = features[0].nrows();
    for (f, m) in manifest.features.iter().zip(&features).skip(1) {
        if m.nrows() != n {
            return Err(Error::RowCountMismatch {
                first: first.name.clone(),
                first_rows: n,
                second: f.name.clone(),
                second_rows: m.nrows(),
            });
        }
    }
    let (labels, class_names) = match &manifest.labels {
        Some(p) => {
            let p = resolve(base, p);
            let tokens = load_label_tokens(&p)?;
            if tokens.len() != n {
                return Err(Error::Format {
                    path: p,
                    message: format!("{} labels for {n} feature rows", tokens.len()),
                });
            }
            remap_labels(&tokens)
        }
        None => (vec![None; n], Vec::new()),
    };
    let d = MultiFeatureDataset {
        features,
        feature_names: manifest.features.iter().map(|f| f.name.clone()).collect(),
        labels,
        n_classes: class_names.len(),
        class_names,
    };
    d.validated()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    #[default]
    Csv,
    Binary,
}

/// Writes a dataset as feature files, a labels file and `manifest.json` in `dir`.
/// Returns the manifest path.
pub fn write_dataset<F: Scalar>(
    d: &MultiFeatureDataset<F>,
    dir: &Path,
    name: &str,
    format: MatrixFormat,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for (fname, m) in d.feature_names.iter().zip(&d.features) {
        let file = match format {
            MatrixFormat::Csv => format!("{fname}.csv"),
            MatrixFormat::Binary => format!("{fname}.bin"),
        };
        let path = dir.join(&file);
        match format {
            MatrixFormat::Csv => write_feature_matrix_csv(&path, m.view())?,
            MatrixFormat::Binary => write_feature_matrix_binary(&path, m.view())?,
        }
        entries.push(FeatureEntry {
            name: fname.clone(),
            path: PathBuf::from(file),
            dim: m.ncols(),
        });
    }
    let labels = if d.labels.iter().any(Option::is_some) {
        let body: String = d
            .labels
            .iter()
            .map(|l| match l {
                Some(k) => d.class_names.get(k.index()).cloned().unwrap_or_else(|| k.to_string()) + "\n",
                None => "?\n".to_string(),
            })
            .collect();
        let path = dir.join("labels.txt");
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        Some(PathBuf::from("labels.txt"))
    } else {
        None
    };
    let manifest = DatasetManifest {
        name: name.to_string(),
        version: MANIFEST_VERSION,
        features: entries,
        labels,
    };
    let path = dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}
