//! Claim verification over triplet graphs.
//!
//! A claim is decomposed into `(head, relation, tail)` triplets by an LLM
//! backend. Entities the claim only describes become placeholders, which are
//! resolved one question at a time against a BM25-indexed corpus. Triplets
//! that took part in a resolution count as verified; the rest are rewritten
//! as sub-claims and checked against retrieved evidence.

pub mod config;
pub mod disambiguation;
pub mod eval;
pub mod graph;
pub mod llm;
pub mod pipeline;
pub mod report;
pub mod retrieval;
pub mod scalar;
pub mod trace;

pub use graph::{ClaimGraph, Entity, Status, Triplet, TripletGroup, Verdict};
pub use scalar::{Real, Scalar};

/// BM25 parameters at the default precision.
pub type Bm25Params = retrieval::Bm25Params<f64>;
/// Ranked retrieval hit at the default precision.
pub type RankedHit = retrieval::ScoredHit<f64>;
