//! Loaders for the HoVer and FEVEROUS validation releases.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::EvalError;
use crate::graph::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Partition {
    #[serde(rename = "2hop")]
    TwoHop,
    #[serde(rename = "3hop")]
    ThreeHop,
    #[serde(rename = "4hop")]
    FourHop,
    MultiHop,
    Disambiguation,
    Numerical,
}

impl Partition {
    pub const ALL: [Partition; 6] = [
        Partition::TwoHop,
        Partition::ThreeHop,
        Partition::FourHop,
        Partition::MultiHop,
        Partition::Disambiguation,
        Partition::Numerical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::TwoHop => "2hop",
            Partition::ThreeHop => "3hop",
            Partition::FourHop => "4hop",
            Partition::MultiHop => "MultiHop",
            Partition::Disambiguation => "Disambiguation",
            Partition::Numerical => "Numerical",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Partition {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Partition::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| EvalError::UnknownPartition(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledClaim {
    pub claim_id: String,
    pub text: String,
    pub gold: Verdict,
    pub partition: Partition,
}

/// Counts of records that did not make it into the claim list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub loaded: usize,
    pub dropped_nei: usize,
    pub dropped_non_sentence: usize,
    pub dropped_other_partition: usize,
    pub malformed: usize,
}

#[derive(Deserialize)]
struct HoverRecord {
    uid: Value,
    claim: String,
    label: String,
    num_hops: u32,
}

fn read(path: &Path) -> Result<String, EvalError> {
    fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn id_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) if !s.is_empty() => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// `SUPPORTED` and `NOT_SUPPORTED`; hop counts 2 to 4 become partitions,
/// anything else is counted and skipped.
pub fn load_hover(path: &Path) -> Result<(Vec<LabeledClaim>, LoadReport), EvalError> {
    let raw = read(path)?;
    let records: Vec<HoverRecord> = serde_json::from_str(&raw).map_err(|e| EvalError::Format {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut report = LoadReport::default();
    let mut claims = Vec::new();
    for (i, r) in records.into_iter().enumerate() {
        let gold = match r.label.as_str() {
            "SUPPORTED" => Verdict::Supported,
            "NOT_SUPPORTED" => Verdict::Refuted,
            other => {
                return Err(EvalError::UnknownLabel {
                    label: other.to_string(),
                    record: i,
                })
            }
        };
        let partition = match r.num_hops {
            2 => Partition::TwoHop,
            3 => Partition::ThreeHop,
            4 => Partition::FourHop,
            _ => {
                report.dropped_other_partition += 1;
                continue;
            }
        };
        let Some(claim_id) = id_string(&r.uid) else {
            report.malformed += 1;
            continue;
        };
        claims.push(LabeledClaim {
            claim_id,
            text: r.claim,
            gold,
            partition,
        });
    }
    report.loaded = claims.len();
    Ok((claims, report))
}

fn feverous_partition(challenge: &str) -> Option<Partition> {
    match challenge {
        "Multi-hop Reasoning" => Some(Partition::MultiHop),
        "Entity Disambiguation" => Some(Partition::Disambiguation),
        "Numerical Reasoning" => Some(Partition::Numerical),
        _ => None,
    }
}

/// Element ids of every evidence set, or `None` if the structure is off.
fn evidence_ids(record: &Value) -> Option<Vec<&str>> {
    let sets = record.get("evidence")?.as_array()?;
    if sets.is_empty() {
        return None;
    }
    let mut ids = Vec::new();
    for set in sets {
        let content = set.get("content")?.as_array()?;
        if content.is_empty() {
            return None;
        }
        for id in content {
            ids.push(id.as_str()?);
        }
    }
    Some(ids)
}

/// JSON Lines. Keeps claims whose evidence is sentences only, drops
/// `NOT ENOUGH INFO`, and maps the challenge annotation to a partition.
pub fn load_feverous(path: &Path) -> Result<(Vec<LabeledClaim>, LoadReport), EvalError> {
    let raw = read(path)?;
    let mut report = LoadReport::default();
    let mut claims = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("{}:{}: {e}", path.display(), i + 1);
                report.malformed += 1;
                continue;
            }
        };
        let label = record.get("label").and_then(Value::as_str).unwrap_or_default();
        // The release opens with a blank header row.
        if label.is_empty() && record.get("claim").and_then(Value::as_str).unwrap_or_default().is_empty() {
            continue;
        }
        let gold = match label {
            "SUPPORTS" => Verdict::Supported,
            "REFUTES" => Verdict::Refuted,
            "NOT ENOUGH INFO" => {
                report.dropped_nei += 1;
                continue;
            }
            other => {
                return Err(EvalError::UnknownLabel {
                    label: other.to_string(),
                    record: i + 1,
                })
            }
        };
        let (Some(claim_id), Some(text), Some(ids)) = (
            record.get("id").and_then(id_string),
            record.get("claim").and_then(Value::as_str),
            evidence_ids(&record),
        ) else {
            log::warn!("{}:{}: malformed record", path.display(), i + 1);
            report.malformed += 1;
            continue;
        };
        if !ids.iter().all(|id| id.contains("_sentence_")) {
            report.dropped_non_sentence += 1;
            continue;
        }
        let challenge = record.get("challenge").and_then(Value::as_str).unwrap_or_default();
        let Some(partition) = feverous_partition(challenge) else {
            report.dropped_other_partition += 1;
            continue;
        };
        claims.push(LabeledClaim {
            claim_id,
            text: text.to_string(),
            gold,
            partition,
        });
    }
    report.loaded = claims.len();
    Ok((claims, report))
}
