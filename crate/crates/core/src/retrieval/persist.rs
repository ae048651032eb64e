//! Versioned, checksummed on-disk index format.
//!
//! An index directory holds three files:
//!
//! * `manifest.json` — format version, language pair, domain scope, BM25
//!   parameters, document count, and SHA-256 checksums of the other files.
//! * `postings.bin` — binary postings and document statistics:
//!   magic `TRIX`, then little-endian `u32` version, `u32` n_docs,
//!   n_docs × `u32` doc lengths, `u64` total token count, `u32` term count,
//!   then per term (in strictly ascending byte order): `u32` byte length,
//!   the term's UTF-8 bytes, `u32` posting count, and that many
//!   (`u32` doc_id, `u32` tf) entries in ascending doc order.
//! * `store.jsonl` — the bilingual pairs, one JSON object per line, in
//!   doc-id order.
//!
//! Loading verifies checksums over the complete file bytes before any
//! parsing, then validates every structural invariant; a bad file never
//! yields a partial index. The byte layout is fully deterministic (terms
//! sorted, postings in insertion order), so rebuilding the same corpus
//! reproduces identical files — manifest checksums double as a determinism
//! probe.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{BilingualPair, DomainScope, LanguagePair};
use crate::error::{Error, Result};
use crate::retrieval::{Bm25Params, Posting, RetrievalIndex};
use crate::util::sha256_hex;

pub const INDEX_FORMAT_VERSION: u32 = 1;

const MAGIC: &[u8; 4] = b"TRIX";
const MANIFEST_FILE: &str = "manifest.json";
const POSTINGS_FILE: &str = "postings.bin";
const STORE_FILE: &str = "store.jsonl";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    lang: LanguagePair,
    domain: DomainScope,
    params: Bm25Params,
    n_docs: u64,
    checksums: BTreeMap<String, String>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn encode_postings(index: &RetrievalIndex) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&INDEX_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(index.doc_len.len() as u32).to_le_bytes());
    for &len in &index.doc_len {
        out.extend_from_slice(&len.to_le_bytes());
    }
    out.extend_from_slice(&index.total_len.to_le_bytes());

    let mut terms: Vec<&String> = index.postings.keys().collect();
    terms.sort_unstable();
    out.extend_from_slice(&(terms.len() as u32).to_le_bytes());
    for term in terms {
        let postings = &index.postings[term];
        out.extend_from_slice(&(term.len() as u32).to_le_bytes());
        out.extend_from_slice(term.as_bytes());
        out.extend_from_slice(&(postings.len() as u32).to_le_bytes());
        for posting in postings {
            out.extend_from_slice(&posting.doc_id.to_le_bytes());
            out.extend_from_slice(&posting.tf.to_le_bytes());
        }
    }
    out
}

/// Persist `index` into `dir` (created if missing).
pub fn save_index(index: &RetrievalIndex, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;

    let postings_bytes = encode_postings(index);

    let mut store_bytes = Vec::new();
    for pair in &index.store {
        serde_json::to_writer(&mut store_bytes, pair).expect("pair serialization cannot fail");
        store_bytes.push(b'\n');
    }

    let mut checksums = BTreeMap::new();
    checksums.insert(POSTINGS_FILE.to_string(), sha256_hex(&postings_bytes));
    checksums.insert(STORE_FILE.to_string(), sha256_hex(&store_bytes));
    let manifest = Manifest {
        version: INDEX_FORMAT_VERSION,
        lang: index.lang.clone(),
        domain: index.scope,
        params: index.params,
        n_docs: index.store.len() as u64,
        checksums,
    };
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serialization cannot fail");
    manifest_bytes.push(b'\n');

    write_file(&dir.join(POSTINGS_FILE), &postings_bytes)?;
    write_file(&dir.join(STORE_FILE), &store_bytes)?;
    write_file(&dir.join(MANIFEST_FILE), &manifest_bytes)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::CorruptIndex("postings file ends mid-record".into()))?;
        let slice = &self.buf[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn at_end(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn verify_checksum(manifest: &Manifest, file: &str, bytes: &[u8]) -> Result<()> {
    let expected = manifest
        .checksums
        .get(file)
        .ok_or_else(|| Error::ChecksumMismatch { file: file.to_string() })?;
    if sha256_hex(bytes) != *expected {
        return Err(Error::ChecksumMismatch { file: file.to_string() });
    }
    Ok(())
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptIndex(msg.into())
}

/// Load an index directory written by [`save_index`]. Fails atomically: any
/// checksum, version, or structural problem rejects the whole directory.
pub fn load_index(dir: &Path) -> Result<RetrievalIndex> {
    let manifest_bytes = read_file(&dir.join(MANIFEST_FILE))?;
    let manifest: Manifest = serde_json::from_slice(&manifest_bytes)
        .map_err(|e| corrupt(format!("manifest.json: {e}")))?;
    if manifest.version != INDEX_FORMAT_VERSION {
        return Err(Error::IndexVersionMismatch {
            found: manifest.version,
            expected: INDEX_FORMAT_VERSION,
        });
    }
    manifest.params.validate()?;

    let postings_bytes = read_file(&dir.join(POSTINGS_FILE))?;
    verify_checksum(&manifest, POSTINGS_FILE, &postings_bytes)?;
    let store_bytes = read_file(&dir.join(STORE_FILE))?;
    verify_checksum(&manifest, STORE_FILE, &store_bytes)?;

    // Postings file.
    let mut r = Reader::new(&postings_bytes);
    if r.take(4)? != MAGIC {
        return Err(corrupt("postings file lacks TRIX magic"));
    }
    let bin_version = r.u32()?;
    if bin_version != INDEX_FORMAT_VERSION {
        return Err(Error::IndexVersionMismatch {
            found: bin_version,
            expected: INDEX_FORMAT_VERSION,
        });
    }
    let n_docs = r.u32()? as usize;
    if n_docs as u64 != manifest.n_docs {
        return Err(corrupt(format!(
            "doc count disagrees: manifest says {}, postings say {n_docs}",
            manifest.n_docs
        )));
    }
    let mut doc_len = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        doc_len.push(r.u32()?);
    }
    let total_len = r.u64()?;
    if total_len != doc_len.iter().map(|&l| u64::from(l)).sum::<u64>() {
        return Err(corrupt("total token count disagrees with doc lengths"));
    }
    let n_terms = r.u32()? as usize;
    let mut postings: HashMap<String, Vec<Posting>> = HashMap::with_capacity(n_terms);
    let mut prev_term: Option<String> = None;
    for _ in 0..n_terms {
        let term_len = r.u32()? as usize;
        let term = std::str::from_utf8(r.take(term_len)?)
            .map_err(|_| corrupt("term is not valid UTF-8"))?
            .to_string();
        if term.is_empty() {
            return Err(corrupt("empty term"));
        }
        if let Some(prev) = &prev_term {
            if *prev >= term {
                return Err(corrupt("terms out of order"));
            }
        }
        let n_postings = r.u32()? as usize;
        if n_postings == 0 {
            return Err(corrupt(format!("term {term:?} has no postings")));
        }
        let mut list = Vec::with_capacity(n_postings);
        let mut prev_doc: Option<u32> = None;
        for _ in 0..n_postings {
            let doc_id = r.u32()?;
            let tf = r.u32()?;
            if doc_id as usize >= n_docs {
                return Err(corrupt(format!("posting references unknown doc {doc_id}")));
            }
            if tf == 0 {
                return Err(corrupt("posting with zero term frequency"));
            }
            if prev_doc.is_some_and(|p| p >= doc_id) {
                return Err(corrupt("postings out of doc order"));
            }
            prev_doc = Some(doc_id);
            list.push(Posting { doc_id, tf });
        }
        postings.insert(term.clone(), list);
        prev_term = Some(term);
    }
    if !r.at_end() {
        return Err(corrupt("trailing bytes after postings"));
    }

    // Pair store.
    let store_text = std::str::from_utf8(&store_bytes).map_err(|_| corrupt("store is not valid UTF-8"))?;
    let mut store = Vec::with_capacity(n_docs);
    for (i, line) in store_text.lines().enumerate() {
        let pair: BilingualPair =
            serde_json::from_str(line).map_err(|e| corrupt(format!("store line {}: {e}", i + 1)))?;
        if pair.lang != manifest.lang {
            return Err(corrupt(format!("store line {}: language {} outside index {}", i + 1, pair.lang, manifest.lang)));
        }
        if !manifest.domain.includes(pair.domain) {
            return Err(corrupt(format!("store line {}: domain {} outside scope {}", i + 1, pair.domain, manifest.domain)));
        }
        store.push(pair);
    }
    if store.len() != n_docs {
        return Err(corrupt(format!("store holds {} pairs, expected {n_docs}", store.len())));
    }

    Ok(RetrievalIndex {
        lang: manifest.lang,
        scope: manifest.domain,
        params: manifest.params,
        postings,
        doc_len,
        total_len,
        store,
    })
}
