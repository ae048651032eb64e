//! Bilingual corpus and test-set ingestion plus seeded random example
//! sampling.
//!
//! Interchange formats: JSONL (`{"src_text": …, "tgt_text": …, "domain": …}`
//! for pairs, `{"src_title": …, "ref_translation": …}` for test sets) and
//! TSV with fixed column order (`src<TAB>tgt<TAB>domain`, test sets
//! `src<TAB>ref`). Files are UTF-8 without BOM. Text is stored verbatim —
//! normalization happens only inside indexing and metrics, because prompts
//! must show the original text.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Ordered (source, target) ISO-639-1 pair, e.g. `en-de`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LanguagePair {
    src: String,
    tgt: String,
}

impl LanguagePair {
    pub fn new(src: &str, tgt: &str) -> Result<Self> {
        let src = src.to_lowercase();
        let tgt = tgt.to_lowercase();
        let valid = |code: &str| code.len() == 2 && code.chars().all(|c| c.is_ascii_lowercase());
        if !valid(&src) || !valid(&tgt) {
            return Err(Error::InvalidLanguagePair(format!(
                "{src}-{tgt}: codes must be two ASCII letters"
            )));
        }
        if src == tgt {
            return Err(Error::InvalidLanguagePair(format!(
                "{src}-{tgt}: source and target must differ"
            )));
        }
        Ok(LanguagePair { src, tgt })
    }

    pub fn src(&self) -> &str {
        &self.src
    }

    pub fn tgt(&self) -> &str {
        &self.tgt
    }

    /// Report-style rendering, e.g. `EN-DE`.
    pub fn display_upper(&self) -> String {
        format!("{}-{}", self.src.to_uppercase(), self.tgt.to_uppercase())
    }
}

impl fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.src, self.tgt)
    }
}

impl FromStr for LanguagePair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (src, tgt) = s
            .split_once('-')
            .ok_or_else(|| Error::InvalidLanguagePair(format!("{s}: expected SRC-TGT")))?;
        LanguagePair::new(src, tgt)
    }
}

impl Serialize for LanguagePair {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LanguagePair {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Stored product-information domain of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Product titles.
    Ttl,
    /// Bullet points.
    Bp,
    /// Product descriptions.
    Pd,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Ttl, Domain::Bp, Domain::Pd];
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Ttl => "TTL",
            Domain::Bp => "BP",
            Domain::Pd => "PD",
        })
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "ttl" => Ok(Domain::Ttl),
            "bp" => Ok(Domain::Bp),
            "pd" => Ok(Domain::Pd),
            _ => Err(Error::UnknownDomain(s.to_string())),
        }
    }
}

/// Domain selector for indexes, sampling pools, and report columns: one
/// stored domain, or the query-time union of all three (T.B.D.). The union
/// tag is never stored on a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DomainScope {
    Single(Domain),
    Tbd,
}

impl DomainScope {
    /// Column order used throughout the reports.
    pub const ALL: [DomainScope; 4] = [
        DomainScope::Single(Domain::Ttl),
        DomainScope::Single(Domain::Bp),
        DomainScope::Single(Domain::Pd),
        DomainScope::Tbd,
    ];

    pub fn includes(&self, domain: Domain) -> bool {
        match self {
            DomainScope::Single(d) => *d == domain,
            DomainScope::Tbd => true,
        }
    }
}

impl fmt::Display for DomainScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainScope::Single(d) => d.fmt(f),
            DomainScope::Tbd => f.write_str("T.B.D."),
        }
    }
}

impl FromStr for DomainScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "tbd" | "t.b.d." => Ok(DomainScope::Tbd),
            other => Ok(DomainScope::Single(other.parse()?)),
        }
    }
}

impl Serialize for DomainScope {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let tag = match self {
            DomainScope::Single(Domain::Ttl) => "ttl",
            DomainScope::Single(Domain::Bp) => "bp",
            DomainScope::Single(Domain::Pd) => "pd",
            DomainScope::Tbd => "tbd",
        };
        serializer.serialize_str(tag)
    }
}

impl<'de> Deserialize<'de> for DomainScope {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// One bilingual record, the unit of indexing and few-shot examples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BilingualPair {
    /// Zero-based input line number of the record at ingestion; unique
    /// within a corpus.
    pub id: u32,
    pub src_text: String,
    pub tgt_text: String,
    pub domain: Domain,
    pub lang: LanguagePair,
}

/// One evaluation item: a source title and its reference translation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSegment {
    pub src_title: String,
    pub ref_translation: String,
}

/// An ingested bilingual corpus. Immutable once loaded.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub lang: LanguagePair,
    pub pairs: Vec<BilingualPair>,
    /// Lines skipped during lenient ingestion.
    pub malformed: usize,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn domain_pool(&self, scope: DomainScope) -> Vec<&BilingualPair> {
        self.pairs.iter().filter(|p| scope.includes(p.domain)).collect()
    }

    /// [`sample_random`] over this corpus's pairs.
    pub fn sample_random(&self, scope: DomainScope, k: usize, seed: u64) -> Result<Vec<BilingualPair>> {
        sample_random(&self.pairs, scope, k, seed)
    }
}

/// A loaded test set plus its lenient-mode skip count.
#[derive(Debug, Clone)]
pub struct TestSet {
    pub segments: Vec<TestSegment>,
    pub malformed: usize,
}

/// On-disk encodings accepted by the loaders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestFormat {
    Jsonl,
    Tsv,
}

impl FromStr for IngestFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "jsonl" => Ok(IngestFormat::Jsonl),
            "tsv" => Ok(IngestFormat::Tsv),
            other => Err(Error::Config(format!("unknown ingest format: {other}"))),
        }
    }
}

impl IngestFormat {
    /// Infer from extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> IngestFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => IngestFormat::Tsv,
            _ => IngestFormat::Jsonl,
        }
    }
}

#[derive(Deserialize)]
struct RawPair {
    src_text: String,
    tgt_text: String,
    domain: String,
}

#[derive(Deserialize)]
struct RawSegment {
    src_title: String,
    ref_translation: String,
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.starts_with(&[0xEF, 0xBB, 0xBF]) {
        return Err(Error::MalformedRecord {
            line: 1,
            reason: "file starts with a UTF-8 BOM; input must be plain UTF-8".into(),
        });
    }
    let text = String::from_utf8(bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })?;
    Ok(text.lines().map(str::to_string).collect())
}

fn parse_pair_line(line: &str, format: IngestFormat) -> std::result::Result<(String, String, String), String> {
    match format {
        IngestFormat::Jsonl => {
            let raw: RawPair = serde_json::from_str(line).map_err(|e| e.to_string())?;
            Ok((raw.src_text, raw.tgt_text, raw.domain))
        }
        IngestFormat::Tsv => {
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next(), cols.next()) {
                (Some(src), Some(tgt), Some(domain), None) => {
                    Ok((src.to_string(), tgt.to_string(), domain.to_string()))
                }
                _ => Err("expected exactly 3 tab-separated columns (src, tgt, domain)".into()),
            }
        }
    }
}

/// Load bilingual pairs from `path`. Ids are the zero-based line numbers of
/// the valid records, so a pair is always traceable to its input line. In
/// lenient mode (the default in the CLI) malformed lines are skipped and
/// counted; in strict mode the first one aborts with its line number.
/// Blank lines are ignored in both modes.
pub fn ingest_pairs(
    path: &Path,
    format: IngestFormat,
    lang: &LanguagePair,
    strict: bool,
) -> Result<Corpus> {
    let mut pairs = Vec::new();
    let mut malformed = 0usize;
    for (idx, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = parse_pair_line(line, format).and_then(|(src, tgt, domain)| {
            if src.trim().is_empty() {
                return Err("empty src_text".into());
            }
            if tgt.trim().is_empty() {
                return Err("empty tgt_text".into());
            }
            let domain: Domain = domain.parse().map_err(|e: Error| e.to_string())?;
            Ok((src, tgt, domain))
        });
        match parsed {
            Ok((src_text, tgt_text, domain)) => pairs.push(BilingualPair {
                id: idx as u32,
                src_text,
                tgt_text,
                domain,
                lang: lang.clone(),
            }),
            Err(reason) if strict => {
                return Err(Error::MalformedRecord { line: idx + 1, reason });
            }
            Err(_) => malformed += 1,
        }
    }
    Ok(Corpus {
        lang: lang.clone(),
        pairs,
        malformed,
    })
}

/// Load a test set (segments in file order; duplicates kept).
pub fn load_test_set(path: &Path, format: IngestFormat, strict: bool) -> Result<TestSet> {
    let mut segments = Vec::new();
    let mut malformed = 0usize;
    for (idx, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: std::result::Result<(String, String), String> = match format {
            IngestFormat::Jsonl => serde_json::from_str::<RawSegment>(line)
                .map(|raw| (raw.src_title, raw.ref_translation))
                .map_err(|e| e.to_string()),
            IngestFormat::Tsv => {
                let mut cols = line.split('\t');
                match (cols.next(), cols.next(), cols.next()) {
                    (Some(src), Some(rf), None) => Ok((src.to_string(), rf.to_string())),
                    _ => Err("expected exactly 2 tab-separated columns (src, ref)".into()),
                }
            }
        };
        let parsed = parsed.and_then(|(src, rf)| {
            if src.trim().is_empty() {
                return Err("empty src_title".into());
            }
            if rf.trim().is_empty() {
                return Err("empty ref_translation".into());
            }
            Ok((src, rf))
        });
        match parsed {
            Ok((src_title, ref_translation)) => segments.push(TestSegment {
                src_title,
                ref_translation,
            }),
            Err(reason) if strict => {
                return Err(Error::MalformedRecord { line: idx + 1, reason });
            }
            Err(_) => malformed += 1,
        }
    }
    Ok(TestSet { segments, malformed })
}

/// Draw `k` distinct pairs without replacement from the domain-filtered
/// pool. A pure function of (pool contents, scope, k, seed): the same
/// arguments always give the same list, in sampling order.
pub fn sample_random(
    pairs: &[BilingualPair],
    scope: DomainScope,
    k: usize,
    seed: u64,
) -> Result<Vec<BilingualPair>> {
    if k < 1 {
        return Err(Error::InvalidParameter("sample size k must be at least 1".into()));
    }
    let pool: Vec<&BilingualPair> = pairs.iter().filter(|p| scope.includes(p.domain)).collect();
    if pool.len() < k {
        return Err(Error::PoolTooSmall {
            needed: k,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..pool.len()).collect();
    let mut picked = Vec::with_capacity(k);
    for i in 0..k {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
        picked.push(pool[indices[i]].clone());
    }
    Ok(picked)
}
