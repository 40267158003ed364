//! End-to-end verification: extract a graph, resolve placeholders, verify the
//! triplets that resolution did not already cover, aggregate.

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::disambiguation::{retrieve_traced, run_disambiguation, DisambiguationOutcome, DisambiguationStatus};
use crate::graph::{ClaimGraph, TripletId, Verdict};
use crate::llm::Gateway;
use crate::retrieval::Retriever;
use crate::trace::{ClaimRecorder, Clock, CostSnapshot, MemorySink, Stage, SystemClock, TraceEvent, TraceSink};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Disambiguation iteration limit.
    pub max_iterations: u32,
    /// Verify every remaining triplet even after one has failed.
    pub exhaustive: bool,
    pub claim_timeout: Duration,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            max_iterations: 5,
            exhaustive: false,
            claim_timeout: Duration::from_secs(300),
            workers: 1,
        }
    }
}

/// Why a claim was refuted without a full run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Extraction,
    Timeout,
    Trace,
    Internal,
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorClass::Extraction => "extraction",
            ErrorClass::Timeout => "timeout",
            ErrorClass::Trace => "trace",
            ErrorClass::Internal => "internal",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubclaimResult {
    pub triplet_id: TripletId,
    pub subclaim: String,
    pub supported: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimResult {
    pub claim_id: String,
    pub claim: String,
    pub verdict: Verdict,
    pub graph: ClaimGraph,
    pub subclaim_results: Vec<SubclaimResult>,
    /// `None` when the run stopped before disambiguation.
    pub disambiguation: Option<DisambiguationOutcome>,
    /// Placeholders in the extracted graph.
    pub initial_placeholders: usize,
    pub error: Option<ErrorClass>,
    pub error_detail: Option<String>,
    pub trace_ref: Option<PathBuf>,
    pub cost: CostSnapshot,
    #[serde(skip)]
    pub events: Vec<TraceEvent>,
}

impl ClaimResult {
    /// Placeholders substituted during disambiguation.
    pub fn resolved_placeholders(&self) -> usize {
        self.disambiguation.as_ref().map_or(0, |d| {
            self.initial_placeholders - d.graph.ambiguous_entities().len().min(self.initial_placeholders)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimInput {
    pub id: String,
    pub text: String,
}

impl ClaimInput {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        ClaimInput {
            id: id.into(),
            text: text.into(),
        }
    }

    /// Uses [`claim_id_for`] as the id.
    pub fn from_text(text: impl Into<String>) -> Self {
        let text = text.into();
        ClaimInput {
            id: claim_id_for(&text),
            text,
        }
    }
}

/// Stable id derived from the claim text.
pub fn claim_id_for(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest[..6].iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Pipeline {
    gateway: Gateway,
    retriever: Arc<dyn Retriever>,
    config: PipelineConfig,
    sink: Arc<dyn TraceSink>,
    clock: Arc<dyn Clock>,
}

struct Stop {
    class: ErrorClass,
    detail: String,
}

impl Pipeline {
    pub fn new(gateway: Gateway, retriever: Arc<dyn Retriever>) -> Self {
        Pipeline {
            gateway,
            retriever,
            config: PipelineConfig::default(),
            sink: Arc::new(MemorySink),
            clock: Arc::new(SystemClock),
        }
    }

    pub fn with_config(mut self, config: PipelineConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_sink(mut self, sink: Arc<dyn TraceSink>) -> Self {
        self.sink = sink;
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn checkpoint(&self, rec: &ClaimRecorder) -> Result<(), Stop> {
        if let Some(detail) = rec.failure() {
            return Err(Stop {
                class: ErrorClass::Trace,
                detail,
            });
        }
        if rec.elapsed() > self.config.claim_timeout {
            return Err(Stop {
                class: ErrorClass::Timeout,
                detail: format!("exceeded {:?}", self.config.claim_timeout),
            });
        }
        Ok(())
    }

    pub fn verify_claim(&self, claim_id: &str, claim: &str) -> ClaimResult {
        let rec = ClaimRecorder::open(self.sink.as_ref(), self.clock.as_ref(), claim_id, claim);
        let mut result = ClaimResult {
            claim_id: claim_id.into(),
            claim: claim.into(),
            verdict: Verdict::Refuted,
            graph: ClaimGraph::empty(claim),
            subclaim_results: Vec::new(),
            disambiguation: None,
            initial_placeholders: 0,
            error: None,
            error_detail: None,
            trace_ref: self.sink.location(claim_id),
            cost: CostSnapshot::default(),
            events: Vec::new(),
        };
        let verdict = match self.run_stages(claim, &rec, &mut result) {
            Ok(v) => v,
            Err(stop) => {
                log::warn!("claim {claim_id}: {} error: {}", stop.class, stop.detail);
                result.error = Some(stop.class);
                result.error_detail = Some(stop.detail);
                Verdict::Refuted
            }
        };
        result.verdict = verdict;
        let _ = rec.record(
            Stage::Verdict,
            json!({
                "verdict": verdict,
                "error_class": result.error,
                "error": result.error_detail,
            }),
        );
        if result.error.is_none() {
            if let Some(detail) = rec.failure() {
                result.verdict = Verdict::Refuted;
                result.error = Some(ErrorClass::Trace);
                result.error_detail = Some(detail);
            }
        }
        let (events, cost) = rec.finish();
        result.events = events;
        result.cost = cost;
        result
    }

    fn run_stages(&self, claim: &str, rec: &ClaimRecorder, result: &mut ClaimResult) -> Result<Verdict, Stop> {
        self.checkpoint(rec)?;
        if claim.trim().is_empty() {
            return Err(Stop {
                class: ErrorClass::Extraction,
                detail: "empty claim".into(),
            });
        }
        let graph = self.gateway.extract_graph(claim, rec).map_err(|e| Stop {
            class: ErrorClass::Extraction,
            detail: e.to_string(),
        })?;
        if graph.triplets.is_empty() {
            return Err(Stop {
                class: ErrorClass::Extraction,
                detail: "graph has no triplets".into(),
            });
        }
        result.graph = graph.clone();
        result.initial_placeholders = graph.ambiguous_entities().len();
        self.checkpoint(rec)?;

        let outcome = run_disambiguation(
            claim,
            graph,
            self.config.max_iterations,
            &self.gateway,
            self.retriever.as_ref(),
            rec,
            Some(self.config.claim_timeout),
        );
        result.graph = outcome.graph.clone();
        let status = outcome.status;
        let verified = outcome.verified_ids.clone();
        result.disambiguation = Some(outcome);
        self.checkpoint(rec)?;
        if status == DisambiguationStatus::Failed {
            return Ok(Verdict::Refuted);
        }

        let mut remaining: Vec<_> = result
            .graph
            .triplets
            .iter()
            .filter(|t| !verified.contains(&t.id))
            .cloned()
            .collect();
        remaining.sort_by_key(|t| t.id);
        for triplet in remaining {
            self.checkpoint(rec)?;
            rec.set_context(json!({"triplet_id": triplet.id}));
            let supported = match self.gateway.triplet_to_subclaim(&triplet, rec) {
                Ok(subclaim) => {
                    let supported = match retrieve_traced(self.retriever.as_ref(), &subclaim, "subclaim", rec) {
                        Some(docs) => self.gateway.verify_subclaim(&subclaim, &docs, rec),
                        None => false,
                    };
                    result.subclaim_results.push(SubclaimResult {
                        triplet_id: triplet.id,
                        subclaim,
                        supported,
                    });
                    supported
                }
                Err(e) => {
                    log::warn!("{e}");
                    result.subclaim_results.push(SubclaimResult {
                        triplet_id: triplet.id,
                        subclaim: triplet.render(),
                        supported: false,
                    });
                    false
                }
            };
            rec.clear_context();
            if !supported && !self.config.exhaustive {
                break;
            }
        }
        self.checkpoint(rec)?;
        Ok(Verdict::aggregate(result.subclaim_results.iter().map(|r| r.supported)))
    }

    fn verify_isolated(&self, input: &ClaimInput) -> ClaimResult {
        match catch_unwind(AssertUnwindSafe(|| self.verify_claim(&input.id, &input.text))) {
            Ok(r) => r,
            Err(panic) => {
                let detail = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                log::error!("claim {} panicked: {detail}", input.id);
                ClaimResult {
                    claim_id: input.id.clone(),
                    claim: input.text.clone(),
                    verdict: Verdict::Refuted,
                    graph: ClaimGraph::empty(input.text.clone()),
                    subclaim_results: Vec::new(),
                    disambiguation: None,
                    initial_placeholders: 0,
                    error: Some(ErrorClass::Internal),
                    error_detail: Some(detail),
                    trace_ref: self.sink.location(&input.id),
                    cost: CostSnapshot::default(),
                    events: Vec::new(),
                }
            }
        }
    }

    /// Results come back in input order. Up to `config.workers` claims run at
    /// once.
    pub fn verify_batch(&self, claims: &[ClaimInput]) -> Vec<ClaimResult> {
        if self.config.workers <= 1 || claims.len() <= 1 {
            return claims.iter().map(|c| self.verify_isolated(c)).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(self.config.workers).build() {
            Ok(pool) => pool.install(|| claims.par_iter().map(|c| self.verify_isolated(c)).collect()),
            Err(e) => {
                log::warn!("worker pool unavailable ({e}); running sequentially");
                claims.iter().map(|c| self.verify_isolated(c)).collect()
            }
        }
    }
}
