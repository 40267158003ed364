//! Two-layer document retrieval: BM25 over an inverted index, an optional
//! reranker, then packing into the prompt budget.

mod bm25;
mod budget;
mod index;
mod rerank;
mod tokenize;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bm25::{idf, term_weight, Bm25Params};
pub use budget::{doc_tokens, pack_budget, Packed, RetrievalBudget};
pub use index::{read_corpus, InvertedIndex, Manifest, Posting, FORMAT_VERSION};
pub use rerank::{rerank, FnReranker, HttpReranker, Passthrough, RerankError, RerankFallback, Reranked, Reranker};
pub use tokenize::{estimate_tokens, Tokenizer};

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error("duplicate doc_id values: {0:?}")]
    DuplicateIds(Vec<String>),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("index format: {0}")]
    Format(String),
    #[error(transparent)]
    Rerank(#[from] RerankError),
}

impl RetrievalError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RetrievalError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

impl Document {
    /// Title and body joined; this is what gets tokenized and reranked.
    pub fn indexed_text(&self) -> String {
        if self.title.is_empty() {
            self.text.clone()
        } else {
            format!("{}\n{}", self.title, self.text)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredHit<F> {
    pub document: Document,
    pub score: F,
}

/// Score descending, then `doc_id` ascending.
pub(crate) fn sort_hits<F: Real>(hits: &mut [ScoredHit<F>]) {
    hits.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.document.doc_id.cmp(&b.document.doc_id))
    });
}

/// Documents returned for one knowledge-base round trip.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    /// First-layer hits after reranking and score filtering, before packing.
    pub hits: Vec<(String, f64)>,
    pub documents: Vec<Document>,
    pub truncated: bool,
    pub warnings: Vec<String>,
}

pub trait Retriever: Send + Sync {
    fn retrieve(&self, query: &str) -> Result<Retrieval, RetrievalError>;
}

/// BM25 top-k, rerank, optional minimum score, then budget packing.
pub struct IndexRetriever {
    index: InvertedIndex,
    params: Bm25Params<f64>,
    top_k: usize,
    reranker: Box<dyn Reranker>,
    fallback: RerankFallback,
    min_score: Option<f64>,
    budget: RetrievalBudget,
}

impl IndexRetriever {
    pub fn new(index: InvertedIndex) -> Self {
        IndexRetriever {
            index,
            params: Bm25Params::default(),
            top_k: 50,
            reranker: Box::new(Passthrough),
            fallback: RerankFallback::Fail,
            min_score: None,
            budget: RetrievalBudget::default(),
        }
    }

    pub fn with_params(mut self, params: Bm25Params<f64>) -> Self {
        self.params = params;
        self
    }

    pub fn with_top_k(mut self, top_k: usize) -> Self {
        self.top_k = top_k;
        self
    }

    pub fn with_reranker(mut self, reranker: Box<dyn Reranker>, fallback: RerankFallback) -> Self {
        self.reranker = reranker;
        self.fallback = fallback;
        self
    }

    pub fn with_min_score(mut self, min_score: Option<f64>) -> Self {
        self.min_score = min_score;
        self
    }

    pub fn with_budget(mut self, budget: RetrievalBudget) -> Self {
        self.budget = budget;
        self
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }
}

impl Retriever for IndexRetriever {
    fn retrieve(&self, query: &str) -> Result<Retrieval, RetrievalError> {
        let first = self.index.search(query, self.top_k, &self.params);
        let reranked = rerank(query, first, self.reranker.as_ref(), self.fallback)?;
        let mut hits = reranked.hits;
        if let Some(min) = self.min_score {
            hits.retain(|h| h.score >= min);
        }
        let packed = pack_budget(&hits, &self.budget);
        let mut warnings: Vec<String> = reranked.warning.into_iter().collect();
        if packed.truncated {
            warnings.push(format!(
                "document {} truncated to fit {} tokens",
                packed.documents[0].doc_id, self.budget.max_tokens
            ));
        }
        Ok(Retrieval {
            hits: hits.iter().map(|h| (h.document.doc_id.clone(), h.score)).collect(),
            documents: packed.documents,
            truncated: packed.truncated,
            warnings,
        })
    }
}
