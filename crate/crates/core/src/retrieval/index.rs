//! Inverted index over a JSON Lines corpus, persisted as a manifest plus a
//! versioned little-endian binary blob.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::bm25::{self, Bm25Params};
use super::tokenize::Tokenizer;
use super::{Document, RetrievalError, ScoredHit};
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"GCIX";
pub const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const BLOB: &str = "index.bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub term_freq: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub doc_count: usize,
    pub term_count: usize,
    pub total_tokens: u64,
    pub avg_doc_len: f64,
    pub tokenizer: Tokenizer,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    docs: Vec<Document>,
    doc_lengths: Vec<u32>,
    postings: BTreeMap<String, Vec<Posting>>,
    total_tokens: u64,
    tokenizer: Tokenizer,
}

/// Reads a JSON Lines corpus (`{"doc_id", "title", "text"}` per line).
pub fn read_corpus(path: &Path) -> Result<Vec<Document>, RetrievalError> {
    let file = fs::File::open(path).map_err(|e| RetrievalError::io(path, e))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| RetrievalError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| RetrievalError::Corpus {
            line: i + 1,
            message: e.to_string(),
        })?;
        if doc.text.trim().is_empty() {
            return Err(RetrievalError::Corpus {
                line: i + 1,
                message: format!("document {:?} has empty text", doc.doc_id),
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

impl InvertedIndex {
    pub fn build(docs: Vec<Document>, tokenizer: Tokenizer) -> Result<Self, RetrievalError> {
        if docs.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        let mut seen = HashSet::new();
        let mut dups: Vec<String> = docs
            .iter()
            .filter(|d| !seen.insert(d.doc_id.as_str()))
            .map(|d| d.doc_id.clone())
            .collect();
        if !dups.is_empty() {
            dups.sort();
            dups.dedup();
            return Err(RetrievalError::DuplicateIds(dups));
        }

        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(docs.len());
        let mut total_tokens = 0u64;
        for (i, doc) in docs.iter().enumerate() {
            let tokens = tokenizer.tokenize(&doc.indexed_text());
            doc_lengths.push(tokens.len() as u32);
            total_tokens += tokens.len() as u64;
            let mut tf: HashMap<String, u32> = HashMap::new();
            for tok in tokens {
                *tf.entry(tok).or_default() += 1;
            }
            for (term, term_freq) in tf {
                postings.entry(term).or_default().push(Posting {
                    doc: i as u32,
                    term_freq,
                });
            }
        }
        Ok(InvertedIndex {
            docs,
            doc_lengths,
            postings,
            total_tokens,
            tokenizer,
        })
    }

    pub fn build_from_path(corpus: &Path, tokenizer: Tokenizer) -> Result<Self, RetrievalError> {
        Self::build(read_corpus(corpus)?, tokenizer)
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.total_tokens as f64 / self.docs.len() as f64
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn tokenizer(&self) -> Tokenizer {
        self.tokenizer
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    /// Top `k` documents by BM25, ties broken by ascending `doc_id`.
    /// Documents sharing no term with the query are not returned.
    pub fn search<F: Real>(&self, query: &str, k: usize, params: &Bm25Params<F>) -> Vec<ScoredHit<F>> {
        let terms = self.tokenizer.tokenize(query);
        if terms.is_empty() || k == 0 {
            return Vec::new();
        }
        let n = self.docs.len();
        let avgdl = F::from_u64(self.total_tokens).unwrap_or_else(F::zero) / F::from_count(n);
        let mut scores: HashMap<u32, F> = HashMap::new();
        for term in &terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = bm25::idf::<F>(n, list.len());
            for p in list {
                let w = bm25::term_weight(params, idf, p.term_freq, self.doc_lengths[p.doc as usize], avgdl);
                let s = scores.entry(p.doc).or_insert_with(F::zero);
                *s = *s + w;
            }
        }
        let mut hits: Vec<ScoredHit<F>> = scores
            .into_iter()
            .map(|(doc, score)| ScoredHit {
                document: self.docs[doc as usize].clone(),
                score,
            })
            .collect();
        super::sort_hits(&mut hits);
        hits.truncate(k);
        hits
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        out.push(u8::from(self.tokenizer.stem));
        put_u32(&mut out, self.docs.len() as u32);
        for (doc, len) in self.docs.iter().zip(&self.doc_lengths) {
            put_str(&mut out, &doc.doc_id);
            put_str(&mut out, &doc.title);
            put_str(&mut out, &doc.text);
            put_u32(&mut out, *len);
        }
        put_u32(&mut out, self.postings.len() as u32);
        for (term, list) in &self.postings {
            put_str(&mut out, term);
            put_u32(&mut out, list.len() as u32);
            for p in list {
                put_u32(&mut out, p.doc);
                put_u32(&mut out, p.term_freq);
            }
        }
        out
    }

    fn decode(bytes: &[u8]) -> Result<Self, RetrievalError> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(RetrievalError::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(RetrievalError::Format(format!("unsupported index version {version}")));
        }
        let tokenizer = Tokenizer { stem: r.take(1)?[0] != 0 };
        let ndocs = r.u32()? as usize;
        let mut docs = Vec::with_capacity(ndocs);
        let mut doc_lengths = Vec::with_capacity(ndocs);
        for _ in 0..ndocs {
            docs.push(Document {
                doc_id: r.string()?,
                title: r.string()?,
                text: r.string()?,
            });
            doc_lengths.push(r.u32()?);
        }
        let nterms = r.u32()? as usize;
        let mut postings = BTreeMap::new();
        for _ in 0..nterms {
            let term = r.string()?;
            let len = r.u32()? as usize;
            let mut list = Vec::with_capacity(len);
            for _ in 0..len {
                let doc = r.u32()?;
                if doc as usize >= ndocs {
                    return Err(RetrievalError::Format(format!("posting references doc {doc}")));
                }
                list.push(Posting { doc, term_freq: r.u32()? });
            }
            postings.insert(term, list);
        }
        if r.pos != bytes.len() {
            return Err(RetrievalError::Format("trailing bytes".into()));
        }
        let total_tokens = doc_lengths.iter().map(|l| *l as u64).sum();
        Ok(InvertedIndex {
            docs,
            doc_lengths,
            postings,
            total_tokens,
            tokenizer,
        })
    }

    pub fn manifest(&self) -> Manifest {
        let blob = self.encode();
        self.manifest_for(&blob)
    }

    fn manifest_for(&self, blob: &[u8]) -> Manifest {
        Manifest {
            format: "graphcheck-index".into(),
            version: FORMAT_VERSION,
            doc_count: self.doc_count(),
            term_count: self.term_count(),
            total_tokens: self.total_tokens,
            avg_doc_len: self.avg_doc_len(),
            tokenizer: self.tokenizer,
            sha256: hex(&Sha256::digest(blob)),
        }
    }

    /// Writes `manifest.json` and `index.bin` into `dir`, creating it if needed.
    /// Output is byte-stable for identical input.
    pub fn save(&self, dir: &Path) -> Result<Manifest, RetrievalError> {
        fs::create_dir_all(dir).map_err(|e| RetrievalError::io(dir, e))?;
        let blob = self.encode();
        let manifest = self.manifest_for(&blob);
        let blob_path = dir.join(BLOB);
        fs::write(&blob_path, &blob).map_err(|e| RetrievalError::io(&blob_path, e))?;
        let manifest_path = dir.join(MANIFEST);
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&manifest_path, json + "\n").map_err(|e| RetrievalError::io(&manifest_path, e))?;
        Ok(manifest)
    }

    pub fn load(dir: &Path) -> Result<Self, RetrievalError> {
        let manifest_path = dir.join(MANIFEST);
        let raw = fs::read_to_string(&manifest_path).map_err(|e| RetrievalError::io(&manifest_path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&raw).map_err(|e| RetrievalError::Format(format!("manifest: {e}")))?;
        if manifest.version != FORMAT_VERSION {
            return Err(RetrievalError::Format(format!(
                "unsupported index version {}",
                manifest.version
            )));
        }
        let blob_path = dir.join(BLOB);
        let blob = fs::read(&blob_path).map_err(|e| RetrievalError::io(&blob_path, e))?;
        if hex(&Sha256::digest(&blob)) != manifest.sha256 {
            return Err(RetrievalError::Format("index.bin checksum mismatch".into()));
        }
        Self::decode(&blob)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], RetrievalError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| RetrievalError::Format("truncated index".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, RetrievalError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn string(&mut self) -> Result<String, RetrievalError> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|e| RetrievalError::Format(e.to_string()))
    }
}
