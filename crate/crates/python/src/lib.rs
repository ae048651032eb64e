//! Python bindings for the titlerag core: tokenization, chrF scoring, the
//! translation-contract parser, prompt rendering, and the BM25 index. The
//! bindings are thin — every number a Python caller sees is computed by the
//! same code the CLI and evaluation harness use, so scores match across
//! languages bit for bit.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use titlerag::corpus::{BilingualPair, Domain, DomainScope, LanguagePair};
use titlerag::metrics::{self, ChrfParams};
use titlerag::prompting::{self, LanguageNames};
use titlerag::retrieval::{load_index, save_index, Bm25Params, RetrievalIndex};
use titlerag::textproc;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_lang(lang: &str) -> PyResult<LanguagePair> {
    lang.parse().map_err(value_err)
}

fn chrf_params(max_n: usize, beta: f64) -> PyResult<ChrfParams> {
    let params = ChrfParams { max_n, beta, strip_ws: true };
    params.validate().map_err(value_err)?;
    Ok(params)
}

/// Lowercase alphanumeric tokens of `text`.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    textproc::tokenize(text).tokens().to_vec()
}

/// Character n-gram counts of order `n` (whitespace stripped by default).
#[pyfunction]
#[pyo3(signature = (text, n, strip_ws = true))]
fn char_ngrams(text: &str, n: usize, strip_ws: bool) -> PyResult<HashMap<String, u64>> {
    if n < 1 {
        return Err(value_err("n-gram order must be at least 1"));
    }
    Ok(textproc::char_ngrams(text, n, strip_ws).counts().clone())
}

/// Sentence-level chrF of `hyp` against `reference`, on the 0–100 scale.
#[pyfunction]
#[pyo3(signature = (hyp, reference, max_n = 6, beta = 2.0))]
fn chrf_sentence(hyp: &str, reference: &str, max_n: usize, beta: f64) -> PyResult<f64> {
    Ok(metrics::chrf_sentence(hyp, reference, &chrf_params(max_n, beta)?))
}

/// Corpus-level chrF: micro-average by default, mean of sentence scores
/// with `sentence_average=True`.
#[pyfunction]
#[pyo3(signature = (hyps, references, max_n = 6, beta = 2.0, sentence_average = false))]
fn chrf_corpus(
    hyps: Vec<String>,
    references: Vec<String>,
    max_n: usize,
    beta: f64,
    sentence_average: bool,
) -> PyResult<f64> {
    if hyps.len() != references.len() {
        return Err(value_err(format!(
            "got {} hypotheses but {} references",
            hyps.len(),
            references.len()
        )));
    }
    let params = chrf_params(max_n, beta)?;
    let pairs = hyps.iter().map(String::as_str).zip(references.iter().map(String::as_str));
    if sentence_average {
        metrics::chrf_corpus_sentence_avg(pairs, &params).map_err(value_err)
    } else {
        metrics::chrf_corpus(pairs, &params).map_err(value_err)
    }
}

/// Extract the `"translation"` string from a raw model response. Raises
/// `ValueError` when the response breaks the contract.
#[pyfunction]
fn parse_translation(raw: &str) -> PyResult<String> {
    titlerag::llm::parse_translation(raw).map_err(value_err)
}

/// SHA-256 hex digest of a prompt text — the key used by scripted-backend
/// fixtures.
#[pyfunction]
fn prompt_hash(prompt_text: &str) -> String {
    titlerag::llm::prompt_hash(prompt_text)
}

/// Zero-shot prompt (template A) for `title`.
#[pyfunction]
#[pyo3(signature = (title, lang = "en-de"))]
fn render_baseline(title: &str, lang: &str) -> PyResult<String> {
    let lang = parse_lang(lang)?;
    prompting::render_baseline(title, &lang, &LanguageNames::default())
        .map(|p| p.text)
        .map_err(value_err)
}

/// Few-shot prompt (template B) for `title` with `examples` given as
/// `(source, translation)` pairs, inserted in order.
#[pyfunction]
#[pyo3(signature = (title, examples, lang = "en-de"))]
fn render_fewshot(title: &str, examples: Vec<(String, String)>, lang: &str) -> PyResult<String> {
    let lang = parse_lang(lang)?;
    let pairs: Vec<BilingualPair> = examples
        .into_iter()
        .enumerate()
        .map(|(i, (src_text, tgt_text))| BilingualPair {
            id: i as u32,
            src_text,
            tgt_text,
            domain: Domain::Ttl,
            lang: lang.clone(),
        })
        .collect();
    prompting::render_fewshot(title, &lang, &LanguageNames::default(), &pairs, None)
        .map(|p| p.text)
        .map_err(value_err)
}

/// One search result: document id, BM25 score, 1-based rank, and the stored
/// bilingual pair.
#[pyclass(frozen, get_all)]
struct Hit {
    rank: usize,
    id: u32,
    score: f64,
    src: String,
    tgt: String,
}

#[pymethods]
impl Hit {
    fn __repr__(&self) -> String {
        format!(
            "Hit(rank={}, id={}, score={:.6}, src={:?}, tgt={:?})",
            self.rank, self.id, self.score, self.src, self.tgt
        )
    }
}

/// Okapi BM25 index over the source side of a bilingual corpus.
#[pyclass]
struct Index {
    inner: RetrievalIndex,
}

#[pymethods]
impl Index {
    #[new]
    #[pyo3(signature = (lang = "en-de", domain = "tbd", k1 = 1.2, b = 0.75))]
    fn new(lang: &str, domain: &str, k1: f64, b: f64) -> PyResult<Self> {
        let lang = parse_lang(lang)?;
        let scope: DomainScope = domain.parse().map_err(value_err)?;
        let inner = RetrievalIndex::new(lang, scope, Bm25Params { k1, b }).map_err(value_err)?;
        Ok(Index { inner })
    }

    /// Index one bilingual pair; returns its document id.
    #[pyo3(signature = (src, tgt, domain = "ttl"))]
    fn add(&mut self, src: &str, tgt: &str, domain: &str) -> PyResult<u32> {
        let domain: Domain = domain.parse().map_err(value_err)?;
        let id = self.inner.n_docs() as u32;
        let pair = BilingualPair {
            id,
            src_text: src.to_string(),
            tgt_text: tgt.to_string(),
            domain,
            lang: self.inner.lang().clone(),
        };
        self.inner.add_pair(pair).map_err(value_err)?;
        Ok(id)
    }

    /// Top-k most similar pairs for `query`, best first. Only positive
    /// scores are returned, so fewer than `k` hits is normal.
    #[pyo3(signature = (query, k = 5))]
    fn search(&self, query: &str, k: usize) -> Vec<Hit> {
        self.inner
            .search_topk(query, k)
            .into_iter()
            .map(|hit| Hit {
                rank: hit.rank,
                id: hit.pair.id,
                score: hit.score,
                src: hit.pair.src_text,
                tgt: hit.pair.tgt_text,
            })
            .collect()
    }

    /// BM25 score of `query` against one stored document.
    fn score(&self, query: &str, doc_id: u32) -> PyResult<f64> {
        self.inner
            .bm25_score(&textproc::tokenize(query), doc_id)
            .map_err(value_err)
    }

    /// Write the index to a directory (manifest, postings, store).
    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_index(&self.inner, &path).map_err(value_err)
    }

    /// Load an index directory written by `save` (checksums verified).
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Index { inner: load_index(&path).map_err(value_err)? })
    }

    #[getter]
    fn n_docs(&self) -> usize {
        self.inner.n_docs()
    }

    #[getter]
    fn avg_doc_len(&self) -> f64 {
        self.inner.avg_doc_len()
    }

    #[getter]
    fn lang(&self) -> String {
        self.inner.lang().to_string()
    }

    #[getter]
    fn domain(&self) -> String {
        self.inner.scope().to_string()
    }

    fn __len__(&self) -> usize {
        self.inner.n_docs()
    }

    fn __repr__(&self) -> String {
        format!(
            "Index(lang={:?}, domain={:?}, n_docs={})",
            self.inner.lang().to_string(),
            self.inner.scope().to_string(),
            self.inner.n_docs()
        )
    }
}

#[pymodule]
fn titlerag_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(char_ngrams, m)?)?;
    m.add_function(wrap_pyfunction!(chrf_sentence, m)?)?;
    m.add_function(wrap_pyfunction!(chrf_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(parse_translation, m)?)?;
    m.add_function(wrap_pyfunction!(prompt_hash, m)?)?;
    m.add_function(wrap_pyfunction!(render_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(render_fewshot, m)?)?;
    m.add_class::<Index>()?;
    m.add_class::<Hit>()?;
    Ok(())
}
