//! Scripted-scenario harness shared by the integration tests.

#![allow(dead_code)]

pub mod criteria;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use graphcheck::disambiguation::DisambiguationStatus;
use graphcheck::llm::{Gateway, MockBackend, MockScript};
use graphcheck::pipeline::{ClaimResult, ErrorClass, Pipeline, PipelineConfig};
use graphcheck::retrieval::{IndexRetriever, InvertedIndex, RetrievalBudget, Tokenizer};
use graphcheck::trace::{MemorySink, Stage, StepClock, TraceSink};
use graphcheck::Verdict;
use serde::Deserialize;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn corpus_index() -> InvertedIndex {
    InvertedIndex::build_from_path(&fixtures().join("corpus.jsonl"), Tokenizer::default()).unwrap()
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub max_iterations: Option<u32>,
    #[serde(default)]
    pub exhaustive: bool,
    pub max_tokens: Option<usize>,
    pub max_docs: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalExpect {
    pub doc_ids: Vec<String>,
    pub truncated: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    pub verdict: Verdict,
    pub error_class: Option<ErrorClass>,
    pub stages: Vec<Stage>,
    pub llm_calls: u64,
    pub kb_interactions: u64,
    pub iterations_used: Option<u32>,
    pub disambiguation: Option<DisambiguationStatus>,
    pub verified_ids: Vec<u32>,
    pub subclaims: Vec<(u32, bool)>,
    pub final_graph: Vec<String>,
    #[serde(default)]
    pub failed_attempts: BTreeMap<u32, usize>,
    pub retrievals: Option<Vec<RetrievalExpect>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub claim: String,
    pub config: ScenarioConfig,
    pub script: MockScript,
    pub expect: Expect,
}

pub fn load_scenarios() -> Vec<Scenario> {
    let dir = fixtures().join("scenarios");
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let raw = fs::read_to_string(p).unwrap();
            serde_json::from_str(&raw).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
        })
        .collect()
}

pub fn scenario_pipeline(s: &Scenario, index: &InvertedIndex, sink: Arc<dyn TraceSink>) -> Pipeline {
    let mut budget = RetrievalBudget::default();
    if let Some(t) = s.config.max_tokens {
        budget.max_tokens = t;
    }
    if let Some(d) = s.config.max_docs {
        budget.max_docs = d;
    }
    let retriever = IndexRetriever::new(index.clone()).with_budget(budget);
    let gateway = Gateway::new(Arc::new(MockBackend::new(s.script.clone())));
    Pipeline::new(gateway, Arc::new(retriever))
        .with_config(PipelineConfig {
            max_iterations: s.config.max_iterations.unwrap_or(5),
            exhaustive: s.config.exhaustive,
            ..Default::default()
        })
        .with_sink(sink)
        .with_clock(Arc::new(StepClock {
            step: Duration::from_millis(1),
        }))
}

pub fn run_scenario(s: &Scenario, index: &InvertedIndex) -> ClaimResult {
    scenario_pipeline(s, index, Arc::new(MemorySink)).verify_claim(&s.name, &s.claim)
}

/// Every difference between `r` and the scenario's expectations.
pub fn mismatches(s: &Scenario, r: &ClaimResult) -> Vec<String> {
    let e = &s.expect;
    let mut out = Vec::new();
    let mut check = |what: &str, ok: bool, detail: String| {
        if !ok {
            out.push(format!("{what}: {detail}"));
        }
    };
    check("verdict", r.verdict == e.verdict, format!("{:?} != {:?}", r.verdict, e.verdict));
    check("error", r.error == e.error_class, format!("{:?} != {:?}", r.error, e.error_class));
    let stages: Vec<Stage> = r.events.iter().map(|ev| ev.stage).collect();
    check("stages", stages == e.stages, format!("{stages:?} != {:?}", e.stages));
    check(
        "llm_calls",
        r.cost.llm_calls == e.llm_calls,
        format!("{} != {}", r.cost.llm_calls, e.llm_calls),
    );
    check(
        "kb_interactions",
        r.cost.kb_interactions == e.kb_interactions,
        format!("{} != {}", r.cost.kb_interactions, e.kb_interactions),
    );
    let d = r.disambiguation.as_ref();
    check(
        "disambiguation",
        d.map(|d| d.status) == e.disambiguation,
        format!("{:?} != {:?}", d.map(|d| d.status), e.disambiguation),
    );
    check(
        "iterations_used",
        d.map(|d| d.iterations_used) == e.iterations_used,
        format!("{:?} != {:?}", d.map(|d| d.iterations_used), e.iterations_used),
    );
    let verified: Vec<u32> = d.map(|d| d.verified_ids.iter().copied().collect()).unwrap_or_default();
    check("verified_ids", verified == e.verified_ids, format!("{verified:?} != {:?}", e.verified_ids));
    let subclaims: Vec<(u32, bool)> = r.subclaim_results.iter().map(|s| (s.triplet_id, s.supported)).collect();
    check("subclaims", subclaims == e.subclaims, format!("{subclaims:?} != {:?}", e.subclaims));
    let graph: Vec<String> = r.graph.triplets.iter().map(|t| t.render()).collect();
    check("final_graph", graph == e.final_graph, format!("{graph:?} != {:?}", e.final_graph));
    let attempts: BTreeMap<u32, usize> = d
        .map(|d| d.attempts.iter().map(|(p, a)| (*p, a.len())).collect())
        .unwrap_or_default();
    check(
        "failed_attempts",
        attempts == e.failed_attempts,
        format!("{attempts:?} != {:?}", e.failed_attempts),
    );
    if let Some(expected) = &e.retrievals {
        let got: Vec<(Vec<String>, bool)> = r
            .events
            .iter()
            .filter(|ev| ev.stage == Stage::Retrieve)
            .map(|ev| {
                (
                    serde_json::from_value(ev.payload["doc_ids"].clone()).unwrap_or_default(),
                    ev.payload["truncated"].as_bool().unwrap_or(false),
                )
            })
            .collect();
        let want: Vec<(Vec<String>, bool)> = expected.iter().map(|x| (x.doc_ids.clone(), x.truncated)).collect();
        check("retrievals", got == want, format!("{got:?} != {want:?}"));
    }
    out
}

/// Backend-call events and consumed retrievals, counted from the trace.
pub fn trace_counts(r: &ClaimResult) -> (u64, u64) {
    let calls = r.events.iter().filter(|e| e.is_backend_call()).count() as u64;
    let kb = r
        .events
        .iter()
        .filter(|e| e.stage == Stage::Retrieve && e.payload.get("error").is_none())
        .count() as u64;
    (calls, kb)
}
