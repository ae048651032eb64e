//! Retrieval-augmented translation of short e-commerce texts.
//!
//! The pipeline: ingest a bilingual corpus ([`corpus`]), index its source
//! side with Okapi BM25 ([`retrieval`]), retrieve the most similar pairs as
//! few-shot examples for a fixed prompt template ([`prompting`]), send the
//! prompt to a pluggable translation backend ([`llm`]), and score the
//! output with chrF ([`metrics`]). The [`harness`] module runs the whole
//! {baseline, random-shot, retrieval-shot} × domain grid and emits Δ-chrF
//! and example-similarity reports; `titlerag` is the command-line front
//! end.
//!
//! Everything is deterministic under a fixed seed and the shipped mock
//! backends, down to byte-identical report files.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod llm;
pub mod metrics;
pub mod prompting;
pub mod retrieval;
pub mod textproc;
mod util;

pub use cli::run_cli;
pub use error::{Error, Result};
