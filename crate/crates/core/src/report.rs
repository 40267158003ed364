//! Per-partition summary tables: partitions as columns, metrics as rows,
//! rendered as markdown or TSV with two decimals.

use serde::{Deserialize, Serialize};

use crate::eval::BenchRun;
use crate::pipeline::ClaimResult;
use crate::scalar::mean;
use crate::trace::Stage;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<String>)>,
}

impl Table {
    pub fn to_markdown(&self) -> String {
        let mut out = format!("| Metric | {} |\n", self.columns.join(" | "));
        out.push_str("|---|");
        out.push_str(&"---:|".repeat(self.columns.len()));
        out.push('\n');
        for (name, cells) in &self.rows {
            out.push_str(&format!("| {name} | {} |\n", cells.join(" | ")));
        }
        out
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("metric\t{}\n", self.columns.join("\t"));
        for (name, cells) in &self.rows {
            out.push_str(&format!("{name}\t{}\n", cells.join("\t")));
        }
        out
    }
}

fn num(v: f64) -> String {
    format!("{v:.2}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), num)
}

/// A labelled row and how to render one column's cell.
type RowSpec<'a, T> = (&'a str, &'a dyn Fn(&T) -> String);

fn table<T>(items: &[T], partition: impl Fn(&T) -> &str, rows: &[RowSpec<T>]) -> Table {
    Table {
        columns: items.iter().map(|i| partition(i).to_string()).collect(),
        rows: rows
            .iter()
            .map(|(name, cell)| (name.to_string(), items.iter().map(cell).collect()))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub partition: String,
    pub claims: usize,
    /// In [0, 1]; `None` when nothing was scored.
    pub macro_f1: Option<f64>,
    pub failed_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub partition: String,
    pub llm_calls: f64,
    pub kb_interactions: f64,
    pub inference_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionSummary {
    pub partition: String,
    /// Mean entity-identification requests per claim.
    pub requests: f64,
    /// Resolved placeholders over all placeholders, in [0, 1].
    pub success_rate: Option<f64>,
}

/// Entity-identification requests in one claim (retries of the same request
/// are not counted again).
pub fn resolution_requests(result: &ClaimResult) -> usize {
    result
        .events
        .iter()
        .filter(|e| e.stage == Stage::IdentifyEntity && e.payload.get("attempt").and_then(|a| a.as_u64()) == Some(0))
        .count()
}

/// Groups `labeled` by partition in the order given by `partitions`. Empty
/// partitions are dropped with a warning.
fn grouped<'a>(
    partitions: &[String],
    labeled: &[(String, &'a ClaimResult)],
    warnings: &mut Vec<String>,
) -> Vec<(String, Vec<&'a ClaimResult>)> {
    let mut out = Vec::new();
    for p in partitions {
        let rs: Vec<&ClaimResult> = labeled.iter().filter(|(l, _)| l == p).map(|(_, r)| *r).collect();
        if rs.is_empty() {
            warnings.push(format!("partition {p}: no results, omitted"));
        } else {
            out.push((p.clone(), rs));
        }
    }
    out
}

pub fn cost_summaries(partitions: &[String], labeled: &[(String, &ClaimResult)]) -> (Vec<CostSummary>, Vec<String>) {
    let mut warnings = Vec::new();
    let rows = grouped(partitions, labeled, &mut warnings)
        .into_iter()
        .map(|(partition, rs)| {
            let f = |g: fn(&ClaimResult) -> f64| mean(&rs.iter().map(|r| g(r)).collect::<Vec<_>>()).unwrap_or(0.0);
            CostSummary {
                partition,
                llm_calls: f(|r| r.cost.llm_calls as f64),
                kb_interactions: f(|r| r.cost.kb_interactions as f64),
                inference_seconds: f(|r| r.cost.inference_seconds),
            }
        })
        .collect();
    (rows, warnings)
}

pub fn resolution_summaries(
    partitions: &[String],
    labeled: &[(String, &ClaimResult)],
) -> (Vec<ResolutionSummary>, Vec<String>) {
    let mut warnings = Vec::new();
    let rows = grouped(partitions, labeled, &mut warnings)
        .into_iter()
        .map(|(partition, rs)| {
            let requests: Vec<f64> = rs.iter().map(|r| resolution_requests(r) as f64).collect();
            let total: usize = rs.iter().map(|r| r.initial_placeholders).sum();
            let resolved: usize = rs.iter().map(|r| r.resolved_placeholders()).sum();
            ResolutionSummary {
                partition,
                requests: mean(&requests).unwrap_or(0.0),
                success_rate: (total > 0).then(|| resolved as f64 / total as f64),
            }
        })
        .collect();
    (rows, warnings)
}

pub fn score_summaries(run: &BenchRun) -> Vec<ScoreSummary> {
    run.partitions
        .iter()
        .map(|p| ScoreSummary {
            partition: p.partition.to_string(),
            claims: p.claims.len(),
            macro_f1: p.macro_f1(),
            failed_runs: p.errors(),
        })
        .collect()
}

/// Macro-F1 shown as a percentage.
pub fn score_table(rows: &[ScoreSummary]) -> Table {
    table(
        rows,
        |r| &r.partition,
        &[
            ("Macro-F1", &|r: &ScoreSummary| opt(r.macro_f1.map(|f| f * 100.0))),
            ("Claims", &|r: &ScoreSummary| r.claims.to_string()),
            ("Failed runs", &|r: &ScoreSummary| r.failed_runs.to_string()),
        ],
    )
}

pub fn cost_table(rows: &[CostSummary]) -> Table {
    table(
        rows,
        |r| &r.partition,
        &[
            ("LLM calls", &|r: &CostSummary| num(r.llm_calls)),
            ("KB interactions", &|r: &CostSummary| num(r.kb_interactions)),
            ("Inference time (s)", &|r: &CostSummary| num(r.inference_seconds)),
        ],
    )
}

/// Success rate shown as a percentage.
pub fn resolution_table(rows: &[ResolutionSummary]) -> Table {
    table(
        rows,
        |r| &r.partition,
        &[
            ("Resolution requests", &|r: &ResolutionSummary| num(r.requests)),
            ("Success rate (%)", &|r: &ResolutionSummary| opt(r.success_rate.map(|s| s * 100.0))),
        ],
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchReport {
    pub markdown: String,
    pub scores_tsv: String,
    pub cost_tsv: String,
    pub resolution_tsv: String,
}

pub fn bench_report(title: &str, run: &BenchRun) -> BenchReport {
    let partitions: Vec<String> = run.partitions.iter().map(|p| p.partition.to_string()).collect();
    let labeled: Vec<(String, &ClaimResult)> = run
        .partitions
        .iter()
        .flat_map(|p| p.results.iter().map(move |r| (p.partition.to_string(), r)))
        .collect();
    let scores = score_table(&score_summaries(run));
    let (cost, mut warnings) = cost_summaries(&partitions, &labeled);
    let (resolution, w) = resolution_summaries(&partitions, &labeled);
    warnings.extend(w);
    let cost = cost_table(&cost);
    let resolution = resolution_table(&resolution);

    let mut md = format!("# {title}\n\n## Macro-F1\n\n{}\n", scores.to_markdown());
    md.push_str(&format!("## Cost (mean per claim)\n\n{}\n", cost.to_markdown()));
    md.push_str(&format!("## Entity resolution\n\n{}", resolution.to_markdown()));
    let all_warnings: Vec<&String> = run.warnings.iter().chain(&warnings).collect();
    if !all_warnings.is_empty() {
        md.push_str("\n## Warnings\n\n");
        for w in all_warnings {
            md.push_str(&format!("- {w}\n"));
        }
    }
    BenchReport {
        markdown: md,
        scores_tsv: scores.to_tsv(),
        cost_tsv: cost.to_tsv(),
        resolution_tsv: resolution.to_tsv(),
    }
}
