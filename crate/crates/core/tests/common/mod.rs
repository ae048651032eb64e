//! Shared helpers for the integration tests: naive reference
//! implementations of the scoring functions (kept deliberately simple and
//! structurally different from the library), plus a deterministic synthetic
//! corpus generator.
//!
//! The generator builds a world where translation is a character cipher:
//! the target side of every pair is `rot13` of its source. The cipher is a
//! character bijection that preserves spaces and digits, so
//! `chrf(rot13(a), rot13(b)) == chrf(a, b)` — translation quality equals
//! source-side similarity of whatever a copying backend picked. Source
//! words use only letters a–m (mapping to n–z), so a source shares no
//! letter n-grams with any target; the digit token in each title keeps
//! source-vs-target chrF small but nonzero.

#![allow(dead_code)] // each integration test binary uses a different subset

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use titlerag::corpus::{ingest_pairs, Domain, DomainScope, IngestFormat, LanguagePair};
use titlerag::retrieval::{save_index, Bm25Params, RetrievalIndex};

// ---------------------------------------------------------------------------
// Naive chrF oracle
// ---------------------------------------------------------------------------

fn char_grams(text: &str, n: usize) -> HashMap<Vec<char>, u64> {
    let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut counts = HashMap::new();
    if n == 0 || chars.len() < n {
        return counts;
    }
    for window in chars.windows(n) {
        *counts.entry(window.to_vec()).or_insert(0u64) += 1;
    }
    counts
}

/// Straightforward chrF: per order, clipped matches over hypothesis and
/// reference totals; precision and recall each averaged over the orders
/// where their own denominator is nonzero; F with β = `beta`.
pub fn naive_chrf(hypothesis: &str, reference: &str, max_n: usize, beta: f64) -> f64 {
    let mut p_sum = 0.0;
    let mut p_orders = 0u32;
    let mut r_sum = 0.0;
    let mut r_orders = 0u32;
    for n in 1..=max_n {
        let hyp = char_grams(hypothesis, n);
        let reference_grams = char_grams(reference, n);
        let hyp_total: u64 = hyp.values().sum();
        let ref_total: u64 = reference_grams.values().sum();
        let matched: u64 = hyp
            .iter()
            .map(|(gram, count)| (*count).min(reference_grams.get(gram).copied().unwrap_or(0)))
            .sum();
        if hyp_total > 0 {
            p_sum += matched as f64 / hyp_total as f64;
            p_orders += 1;
        }
        if ref_total > 0 {
            r_sum += matched as f64 / ref_total as f64;
            r_orders += 1;
        }
    }
    let precision = if p_orders > 0 { p_sum / f64::from(p_orders) } else { 0.0 };
    let recall = if r_orders > 0 { r_sum / f64::from(r_orders) } else { 0.0 };
    if precision + recall == 0.0 {
        return 0.0;
    }
    let b2 = beta * beta;
    100.0 * (1.0 + b2) * precision * recall / (b2 * precision + recall)
}

// ---------------------------------------------------------------------------
// Naive BM25 oracle
// ---------------------------------------------------------------------------

/// Brute-force Okapi BM25 top-k over tokenized documents: score every
/// document directly from the formula, keep positives, sort by
/// (score desc, doc id asc), truncate.
pub fn naive_bm25_topk(
    docs: &[Vec<String>],
    query: &[String],
    k1: f64,
    b: f64,
    k: usize,
) -> Vec<(u32, f64)> {
    let n_docs = docs.len() as f64;
    if docs.is_empty() || k == 0 {
        return Vec::new();
    }
    let total_len: usize = docs.iter().map(Vec::len).sum();
    let avgdl = total_len as f64 / n_docs;

    let mut unique_terms: Vec<&String> = Vec::new();
    let mut seen = HashSet::new();
    for term in query {
        if seen.insert(term) {
            unique_terms.push(term);
        }
    }
    let dfs: Vec<f64> = unique_terms
        .iter()
        .map(|term| docs.iter().filter(|d| d.contains(*term)).count() as f64)
        .collect();

    let mut scored: Vec<(u32, f64)> = Vec::new();
    for (doc_id, doc) in docs.iter().enumerate() {
        let mut score = 0.0;
        for (term, df) in unique_terms.iter().zip(&dfs) {
            if *df == 0.0 {
                continue;
            }
            let tf = doc.iter().filter(|t| t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let idf = (1.0 + (n_docs - df + 0.5) / (df + 0.5)).ln();
            // Grouped exactly like the library's idf × tf-factor product:
            // analytically tied documents must tie exactly here too, or the
            // id tie-break would fire on different sets in the two
            // implementations.
            let norm = 1.0 - b + b * doc.len() as f64 / avgdl;
            score += idf * (tf * (k1 + 1.0) / (tf + k1 * norm));
        }
        if score > 0.0 {
            scored.push((doc_id as u32, score));
        }
    }
    scored.sort_by(|(id_a, score_a), (id_b, score_b)| {
        score_b.partial_cmp(score_a).unwrap().then(id_a.cmp(id_b))
    });
    scored.truncate(k);
    scored
}

// ---------------------------------------------------------------------------
// Synthetic cipher world
// ---------------------------------------------------------------------------

/// Rotate a–z by 13 places; digits and spaces pass through.
pub fn rot13(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            'a'..='z' => (b'a' + (c as u8 - b'a' + 13) % 26) as char,
            other => other,
        })
        .collect()
}

pub struct SyntheticWorld {
    pub dir: PathBuf,
    pub corpus_path: PathBuf,
    pub test_path: PathBuf,
    pub lang: LanguagePair,
    /// Test titles, in segment order.
    pub titles: Vec<String>,
}

fn fresh_word(rng: &mut ChaCha8Rng, used: &mut HashSet<String>) -> String {
    loop {
        let len = rng.random_range(4..=7);
        let word: String = (0..len)
            .map(|_| (b'a' + rng.random_range(0..13u8)) as char)
            .collect();
        if used.insert(word.clone()) {
            return word;
        }
    }
}

/// Change exactly one character of `word`, keeping its length.
fn mutate_word(rng: &mut ChaCha8Rng, word: &str) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    let pos = rng.random_range(0..chars.len());
    let old = chars[pos];
    loop {
        let candidate = (b'a' + rng.random_range(0..13u8)) as char;
        if candidate != old {
            chars[pos] = candidate;
            return chars.into_iter().collect();
        }
    }
}

/// Build a corpus where every test title has two planted near-duplicates
/// per base domain, written before everything less similar:
///
/// - title        `w0 w1 w2 w3 w4 d`  (four content words, a tail word, a
///   two-digit token),
/// - plant X      `w0 w1 w2 w3 x  d`  with `x` a fresh word, then
/// - plant Y      `w0 w1 w2 w3 y  d`  with `y` = `w4` with one character
///   changed.
///
/// X and Y match the same five query terms with the same lengths, so their
/// BM25 scores tie and the lower doc id (X) ranks first; Y is the
/// chrF-closer pair that only a deeper retrieval (k > 1) exposes. Fillers
/// share at most the digit token with any title.
pub fn build_world(dir: &Path, n_segments: usize, n_fillers: usize, seed: u64) -> SyntheticWorld {
    let lang = LanguagePair::new("en", "de").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = HashSet::new();

    let mut records: Vec<(String, Domain)> = Vec::new();
    let mut titles = Vec::new();
    for _ in 0..n_segments {
        let words: Vec<String> = (0..5).map(|_| fresh_word(&mut rng, &mut used)).collect();
        let digits = rng.random_range(10..100u32).to_string();
        let title = format!("{} {}", words.join(" "), digits);
        for domain in Domain::ALL {
            let x = fresh_word(&mut rng, &mut used);
            let y = mutate_word(&mut rng, &words[4]);
            let stem = words[..4].join(" ");
            records.push((format!("{stem} {x} {digits}"), domain));
            records.push((format!("{stem} {y} {digits}"), domain));
        }
        titles.push(title);
    }
    for i in 0..n_fillers {
        let words: Vec<String> = (0..5).map(|_| fresh_word(&mut rng, &mut used)).collect();
        let digits = rng.random_range(10..100u32).to_string();
        let domain = Domain::ALL[i % Domain::ALL.len()];
        records.push((format!("{} {}", words.join(" "), digits), domain));
    }

    let corpus_path = dir.join("corpus.jsonl");
    let mut file = std::fs::File::create(&corpus_path).unwrap();
    for (src, domain) in &records {
        writeln!(
            file,
            "{}",
            serde_json::json!({ "src_text": src, "tgt_text": rot13(src), "domain": domain })
        )
        .unwrap();
    }

    let test_path = dir.join("test.jsonl");
    let mut file = std::fs::File::create(&test_path).unwrap();
    for title in &titles {
        writeln!(
            file,
            "{}",
            serde_json::json!({ "src_title": title, "ref_translation": rot13(title) })
        )
        .unwrap();
    }

    SyntheticWorld {
        dir: dir.to_path_buf(),
        corpus_path,
        test_path,
        lang,
        titles,
    }
}

/// Ingest the world's corpus and persist one index per domain scope under
/// `<dir>/idx/<scope>`.
pub fn build_world_indexes(world: &SyntheticWorld) -> BTreeMap<DomainScope, PathBuf> {
    let corpus = ingest_pairs(&world.corpus_path, IngestFormat::Jsonl, &world.lang, true).unwrap();
    assert_eq!(corpus.malformed, 0);
    let mut out = BTreeMap::new();
    for scope in DomainScope::ALL {
        let pool: Vec<_> = corpus.domain_pool(scope).into_iter().cloned().collect();
        let index =
            RetrievalIndex::build(world.lang.clone(), scope, &pool, Bm25Params::default()).unwrap();
        let dir = world.dir.join("idx").join(scope.to_string().to_lowercase().replace('.', ""));
        save_index(&index, &dir).unwrap();
        out.insert(scope, dir);
    }
    out
}
