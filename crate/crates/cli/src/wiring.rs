//! Builds the backend, gateway and retriever from a validated config.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use graphcheck::config::{BackendMode, Config, API_KEY_ENV};
use graphcheck::llm::{Backend, Exemplars, Gateway, HttpBackend, HttpBackendConfig, MockBackend};
use graphcheck::retrieval::{Bm25Params, HttpReranker, IndexRetriever, InvertedIndex};

use crate::{config_error, usage};

pub fn gateway(config: &Config) -> Result<Gateway> {
    let b = &config.backend;
    let backend: Arc<dyn Backend> = match config.backend_mode().map_err(config_error)? {
        BackendMode::Mock(path) => Arc::new(MockBackend::from_file(&path)?),
        BackendMode::Remote(url) => Arc::new(HttpBackend::new(HttpBackendConfig {
            url,
            model: b.model.clone(),
            timeout: Duration::from_secs(b.timeout_secs),
            temperature: b.temperature,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        })?),
    };
    let mut gateway = Gateway::new(backend)
        .with_retries(b.retries)
        .with_max_output_tokens(b.max_output_tokens);
    if let Some(path) = &b.exemplars {
        gateway = gateway.with_exemplars(Exemplars::from_file(path)?);
    }
    Ok(gateway)
}

fn load_index(dir: &Path) -> Result<InvertedIndex> {
    InvertedIndex::load(dir).with_context(|| format!("loading index {}", dir.display()))
}

pub fn retriever(config: &Config) -> Result<IndexRetriever> {
    let r = &config.retrieval;
    let dir = r
        .index
        .as_deref()
        .ok_or_else(|| usage("an index is required: pass --index or set retrieval.index"))?;
    let mut retriever = IndexRetriever::new(load_index(dir)?)
        .with_params(Bm25Params { k1: r.k1, b: r.b })
        .with_top_k(r.top_k)
        .with_budget(config.budget())
        .with_min_score(r.min_score);
    if let Some(url) = &r.reranker_url {
        let reranker = HttpReranker::new(url.clone(), Duration::from_secs(r.reranker_timeout_secs))?;
        retriever = retriever.with_reranker(Box::new(reranker), r.rerank_fallback);
    }
    Ok(retriever)
}
