//! Inverted index with Okapi BM25 scoring over the source side of a
//! bilingual corpus; targets ride along in the document store so a hit is a
//! ready-made few-shot example.
//!
//! Scoring definition (frozen; the brute-force oracles in the test suite
//! implement the same formula independently):
//!
//! ```text
//! score(q, d) = Σ over distinct query terms t of
//!               idf(t) · tf·(k1+1) / (tf + k1·(1 − b + b·dl/avgdl))
//! idf(t)      = ln(1 + (N − df + 0.5) / (df + 0.5))
//! ```
//!
//! The "+1 inside ln" idf form keeps every term weight positive, so scores
//! are non-negative and a returned hit always has score > 0. The sum runs
//! over *distinct* query terms in first-occurrence order — repeating a word
//! in a query does not double its weight, and the fixed order makes the
//! floating-point sum reproducible. Ties are broken by ascending doc id
//! (insertion order).

mod persist;

pub use persist::{load_index, save_index, INDEX_FORMAT_VERSION};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{BilingualPair, DomainScope, LanguagePair};
use crate::error::{Error, Result};
use crate::textproc::{tokenize, TokenStream};

/// Okapi BM25 parameters: `k1` controls term-frequency saturation, `b`
/// document-length normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(Error::InvalidParameter("bm25 k1 must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidParameter("bm25 b must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// One postings entry: a document and the term's frequency in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc_id: u32,
    pub tf: u32,
}

/// A retrieved example: the stored pair, its BM25 score, and its 1-based
/// rank in the result list.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalHit {
    pub pair: BilingualPair,
    pub score: f64,
    pub rank: usize,
}

/// Inverted index over one (language pair, domain scope). Immutable after
/// build/load as far as readers are concerned; [`RetrievalIndex::add_pair`]
/// requires exclusive access (single writer, multiple readers).
#[derive(Debug, Clone)]
pub struct RetrievalIndex {
    pub(crate) lang: LanguagePair,
    pub(crate) scope: DomainScope,
    pub(crate) params: Bm25Params,
    pub(crate) postings: HashMap<String, Vec<Posting>>,
    pub(crate) doc_len: Vec<u32>,
    pub(crate) total_len: u64,
    pub(crate) store: Vec<BilingualPair>,
}

impl RetrievalIndex {
    pub fn new(lang: LanguagePair, scope: DomainScope, params: Bm25Params) -> Result<Self> {
        params.validate()?;
        Ok(RetrievalIndex {
            lang,
            scope,
            params,
            postings: HashMap::new(),
            doc_len: Vec::new(),
            total_len: 0,
            store: Vec::new(),
        })
    }

    /// Index every pair in order. All pairs must match `lang` and fall
    /// inside `scope` (filter a corpus with
    /// [`crate::corpus::Corpus::domain_pool`] first).
    pub fn build(
        lang: LanguagePair,
        scope: DomainScope,
        pairs: &[BilingualPair],
        params: Bm25Params,
    ) -> Result<Self> {
        let mut index = RetrievalIndex::new(lang, scope, params)?;
        for pair in pairs {
            index.add_pair(pair.clone())?;
        }
        Ok(index)
    }

    /// Append one document. The index afterwards equals a fresh build over
    /// the extended pair list — statistics and all.
    pub fn add_pair(&mut self, pair: BilingualPair) -> Result<()> {
        if pair.lang != self.lang {
            return Err(Error::LanguageMismatch {
                expected: self.lang.to_string(),
                found: pair.lang.to_string(),
            });
        }
        if !self.scope.includes(pair.domain) {
            return Err(Error::DomainOutOfScope {
                domain: pair.domain.to_string(),
                scope: self.scope.to_string(),
            });
        }
        let doc_id = self.store.len() as u32;
        let tokens = tokenize(&pair.src_text);
        let mut tf: HashMap<&str, u32> = HashMap::new();
        for token in &tokens {
            *tf.entry(token.as_str()).or_insert(0) += 1;
        }
        for (term, count) in tf {
            self.postings
                .entry(term.to_string())
                .or_default()
                .push(Posting { doc_id, tf: count });
        }
        self.doc_len.push(tokens.len() as u32);
        self.total_len += tokens.len() as u64;
        self.store.push(pair);
        Ok(())
    }

    pub fn lang(&self) -> &LanguagePair {
        &self.lang
    }

    pub fn scope(&self) -> DomainScope {
        self.scope
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn n_docs(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn avg_doc_len(&self) -> f64 {
        if self.store.is_empty() {
            0.0
        } else {
            self.total_len as f64 / self.store.len() as f64
        }
    }

    /// The stored pairs in doc-id order (doc id = slice position).
    pub fn pairs(&self) -> &[BilingualPair] {
        &self.store
    }

    pub fn pair(&self, doc_id: u32) -> Option<&BilingualPair> {
        self.store.get(doc_id as usize)
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.store.len() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn tf_factor(&self, tf: u32, doc_len: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = f64::from(tf);
        let norm = 1.0 - b + b * f64::from(doc_len) / self.avg_doc_len();
        tf * (k1 + 1.0) / (tf + k1 * norm)
    }

    /// BM25 score of one stored document against a tokenized query. Terms
    /// absent from the document contribute nothing.
    pub fn bm25_score(&self, query: &TokenStream, doc_id: u32) -> Result<f64> {
        if doc_id as usize >= self.store.len() {
            return Err(Error::UnknownDocId(doc_id));
        }
        let mut score = 0.0;
        for term in query.unique_terms() {
            let Some(postings) = self.postings.get(term) else {
                continue;
            };
            // Postings are appended in doc-id order, so they stay sorted.
            let Ok(pos) = postings.binary_search_by_key(&doc_id, |p| p.doc_id) else {
                continue;
            };
            score += self.idf(postings.len()) * self.tf_factor(postings[pos].tf, self.doc_len[doc_id as usize]);
        }
        Ok(score)
    }

    /// Top-k documents for a query: the k highest scores among documents
    /// sharing at least one term with the query, sorted by score descending
    /// then doc id ascending. Fewer than k hits are returned when fewer
    /// documents score above zero.
    pub fn search_topk(&self, query_text: &str, k: usize) -> Vec<RetrievalHit> {
        if k == 0 {
            return Vec::new();
        }
        let query = tokenize(query_text);
        // Term-at-a-time accumulation in distinct-term order: each document
        // receives its contributions in exactly the order bm25_score sums
        // them, so the two paths agree bit for bit.
        let mut accumulated: HashMap<u32, f64> = HashMap::new();
        for term in query.unique_terms() {
            let Some(postings) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(postings.len());
            for posting in postings {
                *accumulated.entry(posting.doc_id).or_insert(0.0) +=
                    idf * self.tf_factor(posting.tf, self.doc_len[posting.doc_id as usize]);
            }
        }

        // Bounded min-heap of the k best (score, doc_id) keys. The ordering
        // is total (doc ids are unique), so heap insertion order — and with
        // it the HashMap's iteration order — cannot affect the result.
        let mut heap: std::collections::BinaryHeap<std::cmp::Reverse<HitKey>> =
            std::collections::BinaryHeap::with_capacity(k + 1);
        for (doc_id, score) in accumulated {
            if score > 0.0 {
                heap.push(std::cmp::Reverse(HitKey { score, doc_id }));
                if heap.len() > k {
                    heap.pop();
                }
            }
        }

        let mut keys: Vec<HitKey> = heap.into_iter().map(|r| r.0).collect();
        keys.sort_by(|a, b| b.cmp(a));
        keys.into_iter()
            .enumerate()
            .map(|(i, key)| RetrievalHit {
                pair: self.store[key.doc_id as usize].clone(),
                score: key.score,
                rank: i + 1,
            })
            .collect()
    }
}

/// Result ordering key: greater = better (higher score, then lower doc id).
#[derive(Debug, Clone, Copy, PartialEq)]
struct HitKey {
    score: f64,
    doc_id: u32,
}

impl Eq for HitKey {}

impl Ord for HitKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Scores are finite: idf and tf factors are ratios of positive
        // finite quantities.
        self.score
            .partial_cmp(&other.score)
            .expect("BM25 scores are never NaN")
            .then_with(|| other.doc_id.cmp(&self.doc_id))
    }
}

impl PartialOrd for HitKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
