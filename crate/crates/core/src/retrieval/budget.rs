use serde::{Deserialize, Serialize};

use super::tokenize::words_to_tokens;
use super::{Document, ScoredHit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalBudget {
    pub max_docs: usize,
    pub max_tokens: usize,
}

impl Default for RetrievalBudget {
    fn default() -> Self {
        RetrievalBudget {
            max_docs: 15,
            max_tokens: 6000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packed {
    pub documents: Vec<Document>,
    pub total_tokens: usize,
    /// Set when the leading document alone exceeded the token cap and was cut.
    pub truncated: bool,
}

/// Estimated prompt tokens for a document (title and text together).
pub fn doc_tokens(doc: &Document) -> usize {
    words_to_tokens(doc.title.split_whitespace().count() + doc.text.split_whitespace().count())
}

/// Longest prefix of `hits` within both caps. A leading document that is over
/// the token cap on its own is cut to fit instead of being dropped, and then
/// fills the pack.
pub fn pack_budget<F>(hits: &[ScoredHit<F>], budget: &RetrievalBudget) -> Packed {
    let mut packed = Packed {
        documents: Vec::new(),
        total_tokens: 0,
        truncated: false,
    };
    for hit in hits.iter().take(budget.max_docs) {
        let cost = doc_tokens(&hit.document);
        if packed.total_tokens + cost <= budget.max_tokens {
            packed.total_tokens += cost;
            packed.documents.push(hit.document.clone());
        } else if packed.documents.is_empty() {
            let doc = truncate_to(&hit.document, budget.max_tokens);
            packed.total_tokens = doc_tokens(&doc);
            packed.documents.push(doc);
            packed.truncated = true;
            break;
        } else {
            break;
        }
    }
    packed
}

fn truncate_to(doc: &Document, max_tokens: usize) -> Document {
    let title_words = doc.title.split_whitespace().count();
    let words: Vec<&str> = doc.text.split_whitespace().collect();
    // largest w with ceil(1.3 * (title + w)) <= max_tokens
    let mut keep = (max_tokens * 10 / 13).saturating_sub(title_words).min(words.len());
    while keep > 0 && words_to_tokens(title_words + keep) > max_tokens {
        keep -= 1;
    }
    Document {
        doc_id: doc.doc_id.clone(),
        title: doc.title.clone(),
        text: words[..keep].join(" "),
    }
}
