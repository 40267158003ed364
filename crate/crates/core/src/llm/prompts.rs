//! Prompt templates for the six backend roles.
//!
//! Each template opens with a fixed instruction block and asks for exactly one
//! JSON object, whose schema is enforced by `parse`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::graph::{Entity, PlaceholderId, Triplet, TripletGroup};
use crate::retrieval::Document;

pub const GRAPH_EXTRACT_INSTRUCTION: &str = "\
You convert a claim into a graph of triplets. Each triplet is (head entity, relation, tail entity) \
and states one sub-claim of the claim. Use the wording of the claim for entities and keep relations \
as short natural-language phrases. When the claim describes an entity without naming it, write a \
placeholder X_1, X_2, ... for that entity and reuse the same placeholder everywhere the entity appears.
Respond with a single JSON object of the form \
{\"triplets\": [{\"id\": 1, \"head\": \"...\", \"relation\": \"...\", \"tail\": \"...\"}]} and nothing else.";

pub const GEN_QUESTION_INSTRUCTION: &str = "\
You are identifying an entity that a claim describes but does not name. The claim has been split \
into triplets. The target placeholder stands for that entity; any other placeholder marked \
(unknown entity) is also unresolved. Choose the triplets that best pin down the target, explain \
the choice, and write one question whose answer is the name of the target entity.
Respond with a single JSON object of the form \
{\"rationale\": \"...\", \"triplet_ids\": [1], \"question\": \"...\"} and nothing else. \
triplet_ids may only contain ids of the triplets listed below.";

pub const REFINE_QUESTION_INSTRUCTION: &str = "\
You are identifying an entity that a claim describes but does not name. The claim has been split \
into triplets. The target placeholder stands for that entity; any other placeholder marked \
(unknown entity) is also unresolved. Earlier questions about the target could not be answered \
from the knowledge base; they are listed with their rationales. Write a new question that relies \
on different triplets or asks for the entity in a different way, and explain the choice.
Respond with a single JSON object of the form \
{\"rationale\": \"...\", \"triplet_ids\": [1], \"question\": \"...\"} and nothing else. \
triplet_ids may only contain ids of the triplets listed below.";

pub const ENTITY_QA_INSTRUCTION: &str = "\
Answer the question using only the documents below. The answer must be the name of a single entity \
stated in the documents. If the documents do not contain the answer, or there are no documents, \
the entity is null.
Respond with a single JSON object of the form {\"entity\": \"...\"} or {\"entity\": null} and nothing else.";

pub const SUBCLAIM_VERIFY_INSTRUCTION: &str = "\
Decide whether the documents below support the claim. Answer true only if the documents state the \
information in the claim. Answer false if they contradict it, do not mention it, or there are no documents.
Respond with a single JSON object of the form {\"supported\": true} or {\"supported\": false} and nothing else.";

pub const SUBCLAIM_GEN_INSTRUCTION: &str = "\
Rewrite the triplet below as one complete, self-contained sentence stating the same fact. Keep the \
head and tail entity names exactly as written.
Respond with a single JSON object of the form {\"subclaim\": \"...\"} and nothing else.";

pub const RETRY_REMINDER: &str = "Your previous reply could not be used";

/// Human-written demonstrations for graph extraction, loaded from a versioned
/// data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplars {
    pub version: u32,
    pub exemplars: Vec<Exemplar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub claim: String,
    pub triplets: Vec<serde_json::Value>,
}

const BUILTIN_EXEMPLARS: &str = include_str!("../../data/graph_exemplars.json");

impl Exemplars {
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN_EXEMPLARS).expect("bundled exemplars are valid")
    }

    pub fn from_file(path: &Path) -> Result<Self, GatewayError> {
        let raw = fs::read_to_string(path).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&raw).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))
    }

    fn render(&self) -> String {
        let mut out = String::new();
        for ex in &self.exemplars {
            let obj = serde_json::json!({ "triplets": ex.triplets });
            out.push_str(&format!("Claim: {}\nOutput: {}\n\n", ex.claim, obj));
        }
        out
    }
}

pub fn graph_extract(claim: &str, exemplars: &Exemplars) -> String {
    format!(
        "{GRAPH_EXTRACT_INSTRUCTION}\n\n{}Claim: {claim}\nOutput:",
        exemplars.render()
    )
}

fn entity_label(e: &Entity, target: Option<PlaceholderId>) -> String {
    match e {
        Entity::Named(t) => t.clone(),
        Entity::Placeholder(i) if Some(*i) == target => format!("X_{i}"),
        Entity::Placeholder(i) => format!("X_{i} (unknown entity)"),
    }
}

pub fn render_triplet(t: &Triplet, target: Option<PlaceholderId>) -> String {
    format!(
        "[{}] {} || {} || {}",
        t.id,
        entity_label(&t.head, target),
        t.relation,
        entity_label(&t.tail, target)
    )
}

fn group_block(claim: &str, group: &TripletGroup) -> String {
    let lines: Vec<String> = group
        .triplets
        .iter()
        .map(|t| render_triplet(t, Some(group.placeholder)))
        .collect();
    format!(
        "Claim: {claim}\nTarget placeholder: X_{}\nTriplets:\n{}\n",
        group.placeholder,
        lines.join("\n")
    )
}

pub fn gen_question(claim: &str, group: &TripletGroup) -> String {
    format!("{GEN_QUESTION_INSTRUCTION}\n\n{}Output:", group_block(claim, group))
}

/// A failed attempt as shown to the model: `(rationale, question)`.
pub fn refine_question(claim: &str, group: &TripletGroup, failed: &[(String, String)]) -> String {
    let mut attempts = String::new();
    for (i, (rationale, question)) in failed.iter().enumerate() {
        let q = if question.is_empty() { "(no question produced)" } else { question };
        attempts.push_str(&format!("{}. Rationale: {rationale}\n   Question: {q}\n", i + 1));
    }
    format!(
        "{REFINE_QUESTION_INSTRUCTION}\n\n{}Failed attempts:\n{attempts}Output:",
        group_block(claim, group)
    )
}

fn documents_block(docs: &[Document]) -> String {
    if docs.is_empty() {
        return "Documents:\n(none)\n".into();
    }
    let mut out = String::from("Documents:\n");
    for (i, d) in docs.iter().enumerate() {
        out.push_str(&format!("[{}] {}\n{}\n", i + 1, d.title, d.text));
    }
    out
}

pub fn entity_qa(question: &str, docs: &[Document]) -> String {
    format!(
        "{ENTITY_QA_INSTRUCTION}\n\n{}\nQuestion: {question}\nOutput:",
        documents_block(docs)
    )
}

pub fn subclaim_verify(subclaim: &str, docs: &[Document]) -> String {
    format!(
        "{SUBCLAIM_VERIFY_INSTRUCTION}\n\n{}\nClaim: {subclaim}\nOutput:",
        documents_block(docs)
    )
}

pub fn subclaim_gen(triplet: &Triplet) -> String {
    format!(
        "{SUBCLAIM_GEN_INSTRUCTION}\n\nTriplet: {} || {} || {}\nOutput:",
        triplet.head, triplet.relation, triplet.tail
    )
}

pub fn with_retry_reminder(prompt: &str, error: &str) -> String {
    format!("{prompt}\n\n{RETRY_REMINDER} ({error}). Reply again with only the JSON object described above.")
}
