//! Backend dispatch for the six prompt roles, with bounded retries on
//! unparseable replies. Every backend call is metered and traced.

mod backend;
mod parse;
pub mod prompts;

use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub use backend::{
    Backend, BackendError, BackendRequest, HttpBackend, HttpBackendConfig, MockBackend, MockRule, MockScript,
    PromptRole,
};
pub use parse::{
    json_object, parse_entity, parse_graph, parse_proposal, parse_subclaim, parse_support, placeholder_id,
    EntityAnswer, QuestionProposal,
};
pub use prompts::Exemplars;

use crate::graph::{ClaimGraph, Triplet, TripletGroup};
use crate::retrieval::Document;
use crate::trace::{ClaimRecorder, Stage};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("graph extraction failed after {attempts} attempts: {last_error}")]
    ExtractionFailed { attempts: u32, last_error: String },
    #[error("question generation failed after {attempts} attempts: {last_error}")]
    QuestionFailed { attempts: u32, last_error: String },
    #[error("triplet {0} still contains a placeholder")]
    UnresolvedTriplet(u32),
    #[error("gateway configuration: {0}")]
    Config(String),
}

struct CallFailure {
    attempts: u32,
    last_error: String,
}

#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn Backend>,
    retries: u32,
    max_output_tokens: u32,
    exemplars: Exemplars,
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Gateway {
            backend,
            retries: 2,
            max_output_tokens: 512,
            exemplars: Exemplars::builtin(),
        }
    }

    /// Extra attempts allowed after an unparseable reply.
    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn with_max_output_tokens(mut self, n: u32) -> Self {
        self.max_output_tokens = n;
        self
    }

    pub fn with_exemplars(mut self, exemplars: Exemplars) -> Self {
        self.exemplars = exemplars;
        self
    }

    pub fn retries(&self) -> u32 {
        self.retries
    }

    pub fn exemplars(&self) -> &Exemplars {
        &self.exemplars
    }

    /// Sends `prompt` up to `1 + retries` times until `parse` accepts the reply.
    /// One trace event per backend call.
    #[allow(clippy::too_many_arguments)]
    fn call<T: Serialize>(
        &self,
        rec: &ClaimRecorder,
        stage: Stage,
        role: PromptRole,
        prompt: String,
        extra: Value,
        result_key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, CallFailure> {
        let mut last_error = String::new();
        for attempt in 0..=self.retries {
            let text = if attempt == 0 {
                prompt.clone()
            } else {
                prompts::with_retry_reminder(&prompt, &last_error)
            };
            let request = BackendRequest {
                role,
                prompt: text,
                max_output_tokens: self.max_output_tokens,
            };
            rec.meter().add_llm_call();
            let mut payload = json!({
                "role": role,
                "attempt": attempt,
                "prompt": request.prompt,
            });
            if let (Value::Object(p), Value::Object(e)) = (&mut payload, &extra) {
                p.extend(e.clone());
            }
            let outcome = match self.backend.complete(&request) {
                Ok(reply) => {
                    payload["response"] = Value::String(reply.clone());
                    parse(&reply)
                }
                Err(e) => Err(format!("backend: {e}")),
            };
            match outcome {
                Ok(value) => {
                    payload[result_key] = serde_json::to_value(&value).unwrap_or(Value::Null);
                    let _ = rec.record(stage, payload);
                    return Ok(value);
                }
                Err(e) => {
                    log::debug!("{role} attempt {attempt} rejected: {e}");
                    payload["error"] = Value::String(e.clone());
                    let _ = rec.record(stage, payload);
                    last_error = e;
                }
            }
        }
        Err(CallFailure {
            attempts: self.retries + 1,
            last_error,
        })
    }

    pub fn extract_graph(&self, claim: &str, rec: &ClaimRecorder) -> Result<ClaimGraph, GatewayError> {
        let prompt = prompts::graph_extract(claim, &self.exemplars);
        self.call(rec, Stage::Extract, PromptRole::GraphExtract, prompt, json!({}), "graph", |r| {
            parse_graph(claim, r)
        })
        .map_err(|f| GatewayError::ExtractionFailed {
            attempts: f.attempts,
            last_error: f.last_error,
        })
    }

    /// Uses the refinement prompt whenever earlier attempts for this group failed.
    pub fn generate_question(
        &self,
        claim: &str,
        group: &TripletGroup,
        failed: &[(String, String)],
        rec: &ClaimRecorder,
    ) -> Result<QuestionProposal, GatewayError> {
        let (role, prompt) = if failed.is_empty() {
            (PromptRole::GenQuestion, prompts::gen_question(claim, group))
        } else {
            (PromptRole::RefineQuestion, prompts::refine_question(claim, group, failed))
        };
        let allowed = group.ids();
        self.call(rec, Stage::Question, role, prompt, json!({}), "proposal", |r| {
            parse_proposal(r, &allowed)
        })
        .map_err(|f| GatewayError::QuestionFailed {
            attempts: f.attempts,
            last_error: f.last_error,
        })
    }

    /// Unparseable replies and answers given without any documents both
    /// yield `NotFound`.
    pub fn identify_entity(&self, question: &str, docs: &[Document], rec: &ClaimRecorder) -> EntityAnswer {
        let prompt = prompts::entity_qa(question, docs);
        let extra = json!({
            "question": question,
            "doc_ids": docs.iter().map(|d| &d.doc_id).collect::<Vec<_>>(),
        });
        let no_docs = docs.is_empty();
        self.call(rec, Stage::IdentifyEntity, PromptRole::EntityQa, prompt, extra, "answer", |r| {
            parse_entity(r).map(|a| if no_docs { EntityAnswer::NotFound } else { a })
        })
        .unwrap_or(EntityAnswer::NotFound)
    }

    /// Unparseable replies and verdicts given without any documents count as
    /// not supported.
    pub fn verify_subclaim(&self, subclaim: &str, docs: &[Document], rec: &ClaimRecorder) -> bool {
        let prompt = prompts::subclaim_verify(subclaim, docs);
        let extra = json!({
            "subclaim": subclaim,
            "doc_ids": docs.iter().map(|d| &d.doc_id).collect::<Vec<_>>(),
        });
        let no_docs = docs.is_empty();
        self.call(rec, Stage::SubclaimVerify, PromptRole::SubclaimVerify, prompt, extra, "supported", |r| {
            parse_support(r).map(|s| s && !no_docs)
        })
        .unwrap_or(false)
    }

    /// Falls back to `"head relation tail"` when the backend never produces a
    /// usable sentence; the fallback is flagged in the trace.
    pub fn triplet_to_subclaim(&self, triplet: &Triplet, rec: &ClaimRecorder) -> Result<String, GatewayError> {
        let (Some(head), Some(tail)) = (triplet.head.text(), triplet.tail.text()) else {
            return Err(GatewayError::UnresolvedTriplet(triplet.id));
        };
        let prompt = prompts::subclaim_gen(triplet);
        let extra = json!({ "triplet_id": triplet.id });
        match self.call(rec, Stage::SubclaimGen, PromptRole::SubclaimGen, prompt, extra, "subclaim", |r| {
            parse_subclaim(r, triplet)
        }) {
            Ok(s) => Ok(s),
            Err(f) => {
                let fallback = format!("{head} {} {tail}", triplet.relation);
                let _ = rec.record(
                    Stage::SubclaimGen,
                    json!({
                        "triplet_id": triplet.id,
                        "fallback": true,
                        "warning": format!("using template sentence: {}", f.last_error),
                        "subclaim": fallback,
                    }),
                );
                Ok(fallback)
            }
        }
    }
}
