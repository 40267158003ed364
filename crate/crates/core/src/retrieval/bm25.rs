//! Okapi BM25 term weighting, generic over the float type.
//!
//! `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))` keeps weights positive for
//! terms present in more than half the corpus. A query term repeated in the
//! query contributes once per occurrence.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params<F> {
    pub k1: F,
    pub b: F,
}

impl<F: Real> Default for Bm25Params<F> {
    fn default() -> Self {
        Bm25Params {
            k1: F::lit(1.2),
            b: F::lit(0.75),
        }
    }
}

pub fn idf<F: Real>(doc_count: usize, doc_freq: usize) -> F {
    let n = F::from_count(doc_count);
    let df = F::from_count(doc_freq);
    let half = F::lit(0.5);
    (F::one() + (n - df + half) / (df + half)).ln()
}

pub fn term_weight<F: Real>(
    params: &Bm25Params<F>,
    idf: F,
    term_freq: u32,
    doc_len: u32,
    avg_doc_len: F,
) -> F {
    let tf = F::from_u32(term_freq).unwrap_or_else(F::zero);
    let dl = F::from_u32(doc_len).unwrap_or_else(F::zero);
    let norm = F::one() - params.b + params.b * dl / avg_doc_len;
    idf * tf * (params.k1 + F::one()) / (tf + params.k1 * norm)
}
