//! Iterative placeholder resolution.
//!
//! Each iteration groups the triplets of the current graph by placeholder and
//! makes one question/answer attempt per group: the backend proposes a
//! question, the question is run against the knowledge base, and the backend
//! names the entity from the retrieved documents. A found entity is
//! substituted into the graph and the triplets used for the question are
//! marked verified; a miss is logged and fed into the next iteration's
//! refinement prompt. Groups are snapshotted at the start of each iteration,
//! so a resolution becomes visible to other groups in the following one.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::graph::{ClaimGraph, PlaceholderId, TripletGroup, TripletId};
use crate::llm::{EntityAnswer, Gateway};
use crate::retrieval::Retriever;
use crate::trace::{ClaimRecorder, Stage};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedAttempt {
    pub rationale: String,
    pub question: String,
}

/// Failed attempts per placeholder, in the order they happened.
pub type AttemptLog = BTreeMap<PlaceholderId, Vec<FailedAttempt>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DisambiguationStatus {
    Successful,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisambiguationOutcome {
    pub status: DisambiguationStatus,
    pub graph: ClaimGraph,
    pub verified_ids: BTreeSet<TripletId>,
    pub attempts: AttemptLog,
    pub iterations_used: u32,
    #[serde(default)]
    pub timed_out: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttemptResult {
    Resolved {
        entity_text: String,
        used_ids: BTreeSet<TripletId>,
    },
    Failed(FailedAttempt),
}

const GENERATION_ERROR: &str = "generation error";

/// Records one knowledge-base round trip as a `Retrieve` event.
pub(crate) fn retrieve_traced(
    retriever: &dyn Retriever,
    query: &str,
    purpose: &str,
    rec: &ClaimRecorder,
) -> Option<Vec<crate::retrieval::Document>> {
    match retriever.retrieve(query) {
        Ok(r) => {
            rec.meter().add_kb_interaction();
            let _ = rec.record(
                Stage::Retrieve,
                json!({
                    "purpose": purpose,
                    "query": query,
                    "hits": r.hits.iter().map(|(id, s)| json!({"doc_id": id, "score": s})).collect::<Vec<_>>(),
                    "doc_ids": r.documents.iter().map(|d| &d.doc_id).collect::<Vec<_>>(),
                    "truncated": r.truncated,
                    "warnings": r.warnings,
                }),
            );
            Some(r.documents)
        }
        Err(e) => {
            let _ = rec.record(
                Stage::Retrieve,
                json!({"purpose": purpose, "query": query, "error": e.to_string()}),
            );
            None
        }
    }
}

/// One question/identify cycle for a single group.
pub fn attempt_group(
    claim: &str,
    group: &TripletGroup,
    log: &[FailedAttempt],
    gateway: &Gateway,
    retriever: &dyn Retriever,
    rec: &ClaimRecorder,
) -> AttemptResult {
    let failed: Vec<(String, String)> = log
        .iter()
        .map(|a| (a.rationale.clone(), a.question.clone()))
        .collect();
    let proposal = match gateway.generate_question(claim, group, &failed, rec) {
        Ok(p) => p,
        Err(e) => {
            log::debug!("X_{}: {e}", group.placeholder);
            return AttemptResult::Failed(FailedAttempt {
                rationale: GENERATION_ERROR.into(),
                question: String::new(),
            });
        }
    };
    let miss = || {
        AttemptResult::Failed(FailedAttempt {
            rationale: proposal.rationale.clone(),
            question: proposal.question.clone(),
        })
    };
    let Some(docs) = retrieve_traced(retriever, &proposal.question, "entity", rec) else {
        return miss();
    };
    match gateway.identify_entity(&proposal.question, &docs, rec) {
        EntityAnswer::Found(entity_text) => AttemptResult::Resolved {
            entity_text,
            used_ids: proposal.triplet_ids.clone(),
        },
        EntityAnswer::NotFound => miss(),
    }
}

/// Runs at most `max_iterations` rounds, stopping as soon as every placeholder
/// is resolved. `max_iterations == 0` performs no attempts. When `deadline`
/// is set and the recorder's clock passes it, the loop stops and the outcome
/// is marked as timed out.
pub fn run_disambiguation(
    claim: &str,
    graph: ClaimGraph,
    max_iterations: u32,
    gateway: &Gateway,
    retriever: &dyn Retriever,
    rec: &ClaimRecorder,
    deadline: Option<Duration>,
) -> DisambiguationOutcome {
    let mut graph = graph;
    let mut verified_ids = BTreeSet::new();
    let mut attempts = AttemptLog::new();
    let mut iterations_used = 0;
    let mut timed_out = false;

    'outer: for iteration in 1..=max_iterations {
        if graph.is_clarified() {
            break;
        }
        iterations_used = iteration;
        let groups = graph.group_triplets();
        let _ = rec.record(
            Stage::Group,
            json!({
                "iteration": iteration,
                "groups": groups.iter().map(|g| json!({
                    "placeholder": g.placeholder,
                    "triplet_ids": g.ids(),
                })).collect::<Vec<_>>(),
            }),
        );
        for group in &groups {
            if deadline.is_some_and(|d| rec.elapsed() > d) {
                timed_out = true;
                break 'outer;
            }
            let p = group.placeholder;
            rec.set_context(json!({"iteration": iteration, "placeholder": p}));
            let log = attempts.get(&p).map(Vec::as_slice).unwrap_or_default();
            let result = attempt_group(claim, group, log, gateway, retriever, rec);
            let failure = match result {
                AttemptResult::Resolved { entity_text, used_ids } => {
                    match graph
                        .resolve_placeholder(p, &entity_text)
                        .and_then(|g| g.mark_verified(&used_ids))
                    {
                        Ok(next) => {
                            graph = next;
                            verified_ids.extend(used_ids.iter().copied());
                            let _ = rec.record(
                                Stage::GraphUpdate,
                                json!({"placeholder": p, "entity": entity_text, "verified_ids": used_ids}),
                            );
                            None
                        }
                        Err(e) => Some(FailedAttempt {
                            rationale: format!("graph update rejected: {e}"),
                            question: String::new(),
                        }),
                    }
                }
                AttemptResult::Failed(f) => Some(f),
            };
            if let Some(f) = failure {
                attempts.entry(p).or_default().push(f);
            }
            rec.clear_context();
        }
    }
    rec.clear_context();

    let status = if graph.is_clarified() {
        DisambiguationStatus::Successful
    } else {
        DisambiguationStatus::Failed
    };
    DisambiguationOutcome {
        status,
        graph,
        verified_ids,
        attempts,
        iterations_used,
        timed_out,
    }
}
