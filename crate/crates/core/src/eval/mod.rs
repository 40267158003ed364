//! Benchmark harness: dataset loading, balanced sampling, Macro-F1, and batch
//! runs through the pipeline.

mod datasets;
mod metrics;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use datasets::{load_feverous, load_hover, LabeledClaim, LoadReport, Partition};
pub use metrics::{balanced_sample, class_counts, macro_f1, ClassCounts, Sample};

use crate::graph::Verdict;
use crate::pipeline::{ClaimInput, ClaimResult, Pipeline};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
    #[error("unknown label {label:?} in record {record}")]
    UnknownLabel { label: String, record: usize },
    #[error("unknown partition {0:?}")]
    UnknownPartition(String),
    #[error("unknown dataset {0:?} (expected hover or feverous)")]
    UnknownDataset(String),
    #[error("{golds} gold labels but {preds} predictions")]
    LengthMismatch { golds: usize, preds: usize },
    #[error("no predictions to score")]
    NoPredictions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Hover,
    Feverous,
}

impl Dataset {
    pub fn load(self, path: &Path) -> Result<(Vec<LabeledClaim>, LoadReport), EvalError> {
        match self {
            Dataset::Hover => load_hover(path),
            Dataset::Feverous => load_feverous(path),
        }
    }

    pub fn partitions(self) -> &'static [Partition] {
        match self {
            Dataset::Hover => &Partition::ALL[..3],
            Dataset::Feverous => &Partition::ALL[3..],
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dataset::Hover => "hover",
            Dataset::Feverous => "feverous",
        })
    }
}

impl FromStr for Dataset {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hover" => Ok(Dataset::Hover),
            "feverous" => Ok(Dataset::Feverous),
            _ => Err(EvalError::UnknownDataset(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchConfig {
    pub partitions: Vec<Partition>,
    /// Claims sampled per partition.
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct PartitionRun {
    pub partition: Partition,
    pub claims: Vec<LabeledClaim>,
    pub results: Vec<ClaimResult>,
}

impl PartitionRun {
    pub fn golds(&self) -> Vec<Verdict> {
        self.claims.iter().map(|c| c.gold).collect()
    }

    /// Failed runs count as Refuted, which is what the pipeline returns for them.
    pub fn preds(&self) -> Vec<Verdict> {
        self.results.iter().map(|r| r.verdict).collect()
    }

    pub fn macro_f1(&self) -> Option<f64> {
        macro_f1(&self.golds(), &self.preds()).ok()
    }

    pub fn errors(&self) -> usize {
        self.results.iter().filter(|r| r.error.is_some()).count()
    }
}

#[derive(Debug, Clone)]
pub struct BenchRun {
    pub partitions: Vec<PartitionRun>,
    pub warnings: Vec<String>,
}

/// Samples each requested partition. Partitions with no claims are reported
/// in the warnings and left out.
pub fn select(claims: &[LabeledClaim], config: &BenchConfig) -> (Vec<(Partition, Vec<LabeledClaim>)>, Vec<String>) {
    let mut warnings = Vec::new();
    let mut out = Vec::new();
    for &p in &config.partitions {
        let pool: Vec<LabeledClaim> = claims.iter().filter(|c| c.partition == p).cloned().collect();
        if pool.is_empty() {
            warnings.push(format!("partition {p}: no claims selected"));
            continue;
        }
        let sample = balanced_sample(&pool, config.n, config.seed);
        warnings.extend(sample.warnings.into_iter().map(|w| format!("partition {p}: {w}")));
        out.push((p, sample.claims));
    }
    (out, warnings)
}

pub fn run_benchmark(claims: &[LabeledClaim], config: &BenchConfig, pipeline: &Pipeline) -> BenchRun {
    let (selected, mut warnings) = select(claims, config);
    let inputs: Vec<ClaimInput> = selected
        .iter()
        .flat_map(|(_, cs)| cs.iter().map(|c| ClaimInput::new(c.claim_id.clone(), c.text.clone())))
        .collect();
    let mut results = pipeline.verify_batch(&inputs).into_iter();
    let partitions: Vec<PartitionRun> = selected
        .into_iter()
        .map(|(partition, claims)| {
            let results: Vec<ClaimResult> = results.by_ref().take(claims.len()).collect();
            PartitionRun {
                partition,
                claims,
                results,
            }
        })
        .collect();
    for run in &partitions {
        if run.errors() > 0 {
            warnings.push(format!(
                "partition {}: failed runs scored as Refuted: {}",
                run.partition,
                run.errors()
            ));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    BenchRun { partitions, warnings }
}
