//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("invalid language pair {0:?}: expected two lowercase ISO-639-1 codes like \"en-de\"")]
    InvalidLanguagePair(String),

    #[error("unknown domain tag {0:?}")]
    UnknownDomain(String),

    #[error("language mismatch: index is {expected}, pair is {found}")]
    LanguageMismatch { expected: String, found: String },

    #[error("pair domain {domain} is outside the index scope {scope}")]
    DomainOutOfScope { domain: String, scope: String },

    #[error("sampling pool has {available} pairs, need {needed}")]
    PoolTooSmall { needed: usize, available: usize },

    #[error("unknown doc id {0}")]
    UnknownDocId(u32),

    #[error("no display name registered for language code {0:?}")]
    MissingLanguageName(String),

    #[error("title must be non-empty")]
    EmptyTitle,

    #[error("few-shot rendering requires at least one example")]
    NoExamples,

    #[error("scoring requires at least one (hypothesis, reference) pair")]
    EmptyScoringInput,

    #[error("delta versus a zero baseline chrF is undefined")]
    ZeroBaseline,

    #[error("index format version {found} unsupported (expected {expected})")]
    IndexVersionMismatch { found: u32, expected: u32 },

    #[error("checksum mismatch for {file}: index rejected")]
    ChecksumMismatch { file: String },

    #[error("corrupt index: {0}")]
    CorruptIndex(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
