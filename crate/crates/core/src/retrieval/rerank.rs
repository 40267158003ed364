//! Second-layer reranking. The reranker only permutes; filtering happens later.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ScoredHit;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum RerankError {
    #[error("reranker unavailable: {0}")]
    Unavailable(String),
    #[error("reranker returned {got} scores for {expected} passages")]
    Arity { expected: usize, got: usize },
    #[error("reranker returned a non-finite score")]
    NonFinite,
}

pub trait Reranker: Send + Sync {
    fn name(&self) -> &str;

    /// Relevance score per passage, parallel to `passages`. `None` keeps the
    /// incoming order.
    fn scores(&self, query: &str, passages: &[String]) -> Result<Option<Vec<f64>>, RerankError>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerankFallback {
    #[default]
    Fail,
    Passthrough,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Passthrough;

impl Reranker for Passthrough {
    fn name(&self) -> &str {
        "passthrough"
    }

    fn scores(&self, _query: &str, _passages: &[String]) -> Result<Option<Vec<f64>>, RerankError> {
        Ok(None)
    }
}

/// Wraps any scoring closure, e.g. an in-process cross-encoder.
pub struct FnReranker<S> {
    name: String,
    score: S,
}

impl<S> FnReranker<S>
where
    S: Fn(&str, &[String]) -> Result<Vec<f64>, RerankError> + Send + Sync,
{
    pub fn new(name: impl Into<String>, score: S) -> Self {
        FnReranker {
            name: name.into(),
            score,
        }
    }
}

impl<S> Reranker for FnReranker<S>
where
    S: Fn(&str, &[String]) -> Result<Vec<f64>, RerankError> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn scores(&self, query: &str, passages: &[String]) -> Result<Option<Vec<f64>>, RerankError> {
        (self.score)(query, passages).map(Some)
    }
}

/// External scoring service: POST `{"query", "passages"}`, response is either
/// a bare score array or `{"scores": [...]}`.
pub struct HttpReranker {
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpReranker {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Result<Self, RerankError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| RerankError::Unavailable(e.to_string()))?;
        Ok(HttpReranker {
            url: url.into(),
            client,
        })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScoreResponse {
    Bare(Vec<f64>),
    Wrapped { scores: Vec<f64> },
}

impl Reranker for HttpReranker {
    fn name(&self) -> &str {
        &self.url
    }

    fn scores(&self, query: &str, passages: &[String]) -> Result<Option<Vec<f64>>, RerankError> {
        let resp = self
            .client
            .post(&self.url)
            .json(&serde_json::json!({ "query": query, "passages": passages }))
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| RerankError::Unavailable(e.to_string()))?;
        let body: ScoreResponse = resp.json().map_err(|e| RerankError::Unavailable(e.to_string()))?;
        Ok(Some(match body {
            ScoreResponse::Bare(s) | ScoreResponse::Wrapped { scores: s } => s,
        }))
    }
}

#[derive(Debug)]
pub struct Reranked<F> {
    pub hits: Vec<ScoredHit<F>>,
    pub warning: Option<String>,
}

/// Reorders `hits` by reranker score, descending; equal scores keep their
/// incoming order. Returned hits carry the reranker's score.
pub fn rerank<F: Real>(
    query: &str,
    hits: Vec<ScoredHit<F>>,
    reranker: &dyn Reranker,
    fallback: RerankFallback,
) -> Result<Reranked<F>, RerankError> {
    let passages: Vec<String> = hits.iter().map(|h| h.document.indexed_text()).collect();
    let scored = reranker.scores(query, &passages).and_then(|s| match s {
        Some(v) if v.len() != hits.len() => Err(RerankError::Arity {
            expected: hits.len(),
            got: v.len(),
        }),
        Some(v) if v.iter().any(|x| !x.is_finite()) => Err(RerankError::NonFinite),
        other => Ok(other),
    });
    let scores = match scored {
        Ok(Some(s)) => s,
        Ok(None) => return Ok(Reranked { hits, warning: None }),
        Err(e) => {
            return match fallback {
                RerankFallback::Fail => Err(e),
                RerankFallback::Passthrough => Ok(Reranked {
                    hits,
                    warning: Some(format!("{e}; kept first-layer order")),
                }),
            }
        }
    };
    let mut paired: Vec<(f64, ScoredHit<F>)> = scores.into_iter().zip(hits).collect();
    paired.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let hits = paired
        .into_iter()
        .map(|(s, mut h)| {
            h.score = F::from_f64(s).unwrap_or_else(F::zero);
            h
        })
        .collect();
    Ok(Reranked { hits, warning: None })
}
