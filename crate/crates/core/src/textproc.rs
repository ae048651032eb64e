//! Deterministic text normalization: word tokenization for indexing and
//! character n-gram extraction for chrF.
//!
//! The tokenization rule is fixed so index-time and query-time analysis
//! always agree: maximal runs of Unicode alphanumeric characters (categories
//! L* and N*) become tokens, everything else separates, and tokens are
//! lowercased. No stemming, no stopwords — titles are dense with brands and
//! part numbers, and those are the strongest retrieval keys.

use std::collections::HashMap;

/// Ordered lowercase word tokens produced by [`tokenize`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenStream {
    tokens: Vec<String>,
}

impl TokenStream {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Distinct terms in first-occurrence order. Scoring iterates terms in
    /// this order so repeated runs sum floats identically.
    pub fn unique_terms(&self) -> Vec<&str> {
        let mut seen = std::collections::HashSet::new();
        self.tokens
            .iter()
            .filter(|t| seen.insert(t.as_str()))
            .map(|t| t.as_str())
            .collect()
    }
}

impl<'a> IntoIterator for &'a TokenStream {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.tokens.iter()
    }
}

/// Split `text` into lowercase alphanumeric tokens.
pub fn tokenize(text: &str) -> TokenStream {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lc in ch.to_lowercase() {
                current.push(lc);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    TokenStream { tokens }
}

/// Multiset of character n-grams of one order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramMultiset {
    n: usize,
    counts: HashMap<String, u64>,
}

impl NgramMultiset {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> &HashMap<String, u64> {
        &self.counts
    }

    pub fn get(&self, gram: &str) -> u64 {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    /// Total n-gram occurrences (sum of multiset counts).
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Size of the clipped multiset intersection: Σ min(count, other count).
    pub fn matched(&self, other: &NgramMultiset) -> u64 {
        self.counts
            .iter()
            .map(|(gram, &count)| count.min(other.get(gram)))
            .sum()
    }
}

/// Count character n-grams of order `n`. With `strip_ws` all Unicode
/// whitespace is removed before the window slides; text shorter than `n`
/// yields an empty multiset.
pub fn char_ngrams(text: &str, n: usize, strip_ws: bool) -> NgramMultiset {
    assert!(n >= 1, "n-gram order must be at least 1");
    let chars: Vec<char> = text
        .chars()
        .filter(|c| !(strip_ws && c.is_whitespace()))
        .collect();
    let mut counts = HashMap::new();
    if chars.len() >= n {
        for window in chars.windows(n) {
            *counts
                .entry(window.iter().collect::<String>())
                .or_insert(0u64) += 1;
        }
    }
    NgramMultiset { n, counts }
}
