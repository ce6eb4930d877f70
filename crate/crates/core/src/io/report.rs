//! JSON run reports and the flattened per-round MAP table.
//!
//! A single run serializes as
//!
//! ```json
//! {"config": {...},
//!  "rounds": [{"round": 0, "variant": "CURL-EF", "map": 0.61,
//!              "additions": [{"view": "EF", "class": 2, "sample_id": 17,
//!                             "confidence": 0.83, "relaxed": false}]}]}
//! ```
//!
//! An experiment report wraps one such run per (labels per class, repetition)
//! cell and adds the mean over repetitions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cotrain::CotrainState;
use crate::error::{Error, Result};
use crate::types::ViewKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditionEntry {
    pub view: ViewKind,
    pub class: usize,
    pub sample_id: usize,
    pub confidence: f64,
    pub relaxed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundEntry {
    pub round: usize,
    pub variant: String,
    pub map: f64,
    pub additions: Vec<AdditionEntry>,
}

impl RoundEntry {
    /// Entry for `round`, listing that round's additions to the given views.
    pub fn from_state<F>(round: usize, variant: &str, map: f64, state: &CotrainState<F>, views: &[ViewKind]) -> Self {
        let additions = match round {
            0 => Vec::new(),
            r => state.history[r - 1]
                .additions
                .iter()
                .filter(|a| views.contains(&a.view))
                .map(|a| AdditionEntry {
                    view: a.view,
                    class: a.label.label.get(),
                    sample_id: a.label.sample_id,
                    confidence: a.label.confidence,
                    relaxed: a.label.relaxed,
                })
                .collect(),
        };
        RoundEntry {
            round,
            variant: variant.to_string(),
            map,
            additions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: serde_json::Value,
    pub rounds: Vec<RoundEntry>,
}

impl RunReport {
    /// MAP values of one variant, ordered by round.
    pub fn maps(&self, variant: &str) -> Vec<f64> {
        let mut entries: Vec<&RoundEntry> = self.rounds.iter().filter(|e| e.variant == variant).collect();
        entries.sort_by_key(|e| e.round);
        entries.into_iter().map(|e| e.map).collect()
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn save_run_report(report: &RunReport, path: &Path) -> Result<()> {
    write_json(report, path)
}

pub fn load_run_report(path: &Path) -> Result<RunReport> {
    read_json(path)
}

/// One repetition at one labels-per-class setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub labels_per_class: usize,
    pub run: usize,
    pub seed: u64,
    pub baseline_map: f64,
    pub rounds: Vec<RoundEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub labels_per_class: usize,
    pub variant: String,
    pub round: usize,
    pub mean_map: f64,
    pub std_map: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: serde_json::Value,
    pub cells: Vec<CellReport>,
    /// Supervised baseline (round 0 of the early-fusion classifier).
    pub baseline: Vec<SummaryRow>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn summary_row(&self, labels_per_class: usize, variant: &str, round: usize) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .chain(&self.baseline)
            .find(|r| r.labels_per_class == labels_per_class && r.variant == variant && r.round == round)
    }

    /// Baseline and summary rows as CSV, one row per (setting, variant, round).
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("labels_per_class,variant,round,mean_map,std_map,runs\n");
        for r in self.baseline.iter().chain(&self.summary) {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.labels_per_class, r.variant, r.round, r.mean_map, r.std_map, r.runs
            ));
        }
        out
    }
}
