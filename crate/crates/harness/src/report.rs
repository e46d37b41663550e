//! Report types and file emission. CSV columns are fixed so downstream plot
//! scripts and CI diffs never chase a moving schema; all floats print with
//! Rust's shortest round-trip formatting, which makes reruns byte-comparable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use qadv_core::noise::NoiseSweepRow;
use qadv_core::train::History;
use qadv_core::{Error, Result};

/// One accuracy measurement; the shared row shape of the attack, transfer,
/// and adversarial-training CSVs.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub epsilon: f64,
    pub target_id: String,
    pub accuracy: f64,
    pub n_examples: usize,
    pub seed: u64,
    pub config_hash: String,
}

pub const ACCURACY_HEADER: &str = "epsilon,target_id,accuracy,n_examples,seed,config_hash";

pub fn accuracy_csv(rows: &[AccuracyRow]) -> String {
    let mut out = String::from(ACCURACY_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epsilon, r.target_id, r.accuracy, r.n_examples, r.seed, r.config_hash
        )
        .expect("string write");
    }
    out
}

pub const NOISE_HEADER: &str = "noise_kind,strength,trajectories,accuracy,ci_low,ci_high";

pub fn noise_csv(rows: &[NoiseSweepRow]) -> String {
    let mut out = String::from(NOISE_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.noise_kind, r.strength, r.trajectories, r.accuracy, r.ci_low, r.ci_high
        )
        .expect("string write");
    }
    out
}

pub fn history_csv(history: &History) -> String {
    let mut out = String::from("epoch,train_loss,train_acc,test_acc\n");
    for row in history {
        let test = row.test_acc.map(|a| a.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", row.epoch, row.train_loss, row.train_acc, test)
            .expect("string write");
    }
    out
}

/// White-box attack on one source model replayed across every target.
#[derive(Debug, Clone, Serialize)]
pub struct TransferReport {
    pub source_id: String,
    pub target_ids: Vec<String>,
    pub epsilon_grid: Vec<f64>,
    /// `accuracy[target][eps]` on the perturbed images.
    pub accuracy: Vec<Vec<f64>>,
    /// Per-target accuracy on the unperturbed attack subset.
    pub clean: Vec<f64>,
    pub n_examples: usize,
    pub seed: u64,
}

impl TransferReport {
    /// Completeness plus the ε=0 column: a zero-budget attack cannot move
    /// any pixel, so its replay must equal the clean accuracy exactly.
    pub fn validate(&self) -> Result<()> {
        if self.accuracy.len() != self.target_ids.len() || self.clean.len() != self.target_ids.len()
        {
            return Err(Error::Training(format!(
                "transfer matrix has {} rows for {} targets",
                self.accuracy.len(),
                self.target_ids.len()
            )));
        }
        for (t, row) in self.accuracy.iter().enumerate() {
            if row.len() != self.epsilon_grid.len() {
                return Err(Error::Training(format!(
                    "target '{}' has {} cells for {} epsilons",
                    self.target_ids[t],
                    row.len(),
                    self.epsilon_grid.len()
                )));
            }
            for (e, acc) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(acc) {
                    return Err(Error::Training(format!(
                        "accuracy {acc} out of range at ('{}', ε={})",
                        self.target_ids[t], self.epsilon_grid[e]
                    )));
                }
            }
            if let Some(zero) = self.epsilon_grid.iter().position(|&e| e == 0.0) {
                if row[zero] != self.clean[t] {
                    return Err(Error::Training(format!(
                        "ε=0 accuracy {} differs from clean accuracy {} for '{}'",
                        row[zero], self.clean[t], self.target_ids[t]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Flatten to fixed-schema rows; a clean (ε=0) row per target is
    /// guaranteed even when the grid itself starts above zero.
    pub fn rows(&self, config_hash: &str) -> Vec<AccuracyRow> {
        let mut rows = Vec::new();
        for (t, id) in self.target_ids.iter().enumerate() {
            if !self.epsilon_grid.contains(&0.0) {
                rows.push(AccuracyRow {
                    epsilon: 0.0,
                    target_id: id.clone(),
                    accuracy: self.clean[t],
                    n_examples: self.n_examples,
                    seed: self.seed,
                    config_hash: config_hash.into(),
                });
            }
            for (e, &eps) in self.epsilon_grid.iter().enumerate() {
                rows.push(AccuracyRow {
                    epsilon: eps,
                    target_id: id.clone(),
                    accuracy: self.accuracy[t][e],
                    n_examples: self.n_examples,
                    seed: self.seed,
                    config_hash: config_hash.into(),
                });
            }
        }
        rows
    }
}

/// Confusion counts for the disagreement detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DetectionReport {
    pub true_positives: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub clean_pool: usize,
    pub attacked_pool: usize,
}

impl DetectionReport {
    pub fn validate(&self) -> Result<()> {
        if self.true_positives + self.false_negatives != self.attacked_pool {
            return Err(Error::Training(format!(
                "attacked pool miscounted: {} + {} != {}",
                self.true_positives, self.false_negatives, self.attacked_pool
            )));
        }
        if self.false_positives + self.true_negatives != self.clean_pool {
            return Err(Error::Training(format!(
                "clean pool miscounted: {} + {} != {}",
                self.false_positives, self.true_negatives, self.clean_pool
            )));
        }
        Ok(())
    }

    pub fn tp_rate(&self) -> f64 {
        self.true_positives as f64 / self.attacked_pool as f64
    }

    pub fn fp_rate(&self) -> f64 {
        self.false_positives as f64 / self.clean_pool as f64
    }

    pub fn csv(&self, seed: u64, config_hash: &str) -> String {
        format!(
            "tp,fn,fp,tn,tp_rate,fp_rate,clean_pool,attacked_pool,seed,config_hash\n\
             {},{},{},{},{},{},{},{},{},{}\n",
            self.true_positives,
            self.false_negatives,
            self.false_positives,
            self.true_negatives,
            self.tp_rate(),
            self.fp_rate(),
            self.clean_pool,
            self.attacked_pool,
            seed,
            config_hash
        )
    }
}

/// What a subcommand run wrote and under which seeds; saved next to the
/// CSVs. Output paths are recorded relative to the run directory so a rerun
/// into a different directory produces a byte-identical manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub seeds: BTreeMap<String, u64>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
    #[serde(skip)]
    base: PathBuf,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config_hash: &str,
        seed: u64,
        seeds: BTreeMap<String, u64>,
        base: &Path,
    ) -> Self {
        RunManifest {
            command: command.into(),
            config_hash: config_hash.into(),
            seed,
            seeds,
            outputs: Vec::new(),
            details: serde_json::Value::Null,
            base: base.to_path_buf(),
        }
    }

    pub fn add_output(&mut self, path: &Path) {
        let shown = path.strip_prefix(&self.base).unwrap_or(path);
        self.outputs.push(shown.display().to_string());
    }

    pub fn save(&self) -> Result<PathBuf> {
        let path = self.base.join(format!("manifest_{}.json", self.command));
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("manifest serialization: {e}")))?;
        write_text(&path, &json)?;
        Ok(path)
    }
}

/// Write a file, creating parent directories.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, content)?;
    Ok(())
}
