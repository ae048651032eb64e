//! Deterministic offline backends. They make the whole pipeline testable
//! without a model: each is a pure function of the prompt, so a seeded run
//! is bit-reproducible.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::llm::{Backend, TranslationJob};
use crate::metrics::{chrf_sentence, ChrfParams};
use crate::util::sha256_hex;

fn json_reply(text: &str) -> String {
    serde_json::json!({ "translation": text }).to_string()
}

/// Replies with the source title, wrapped in the JSON contract. Useful as a
/// do-nothing translator: against a test set whose references equal the
/// sources it scores a perfect 100.
pub struct EchoBackend;

impl Backend for EchoBackend {
    fn complete(&self, job: &TranslationJob) -> std::result::Result<String, String> {
        Ok(json_reply(&job.title))
    }
}

/// Replies with the target text of the best provided example — the one
/// whose source is chrF-closest to the title, earliest example winning
/// ties. Under retrieval orderings that agree with chrF this is simply
/// Example 1. With no examples (template A) it replies with the title
/// unchanged. This makes few-shot quality visible to the metric: better
/// examples, better "translation".
#[derive(Default)]
pub struct CopyBestBackend {
    chrf: ChrfParams,
}

impl Backend for CopyBestBackend {
    fn complete(&self, job: &TranslationJob) -> std::result::Result<String, String> {
        let mut best: Option<(f64, &str)> = None;
        for example in &job.examples {
            let similarity = chrf_sentence(&example.src_text, &job.title, &self.chrf);
            // Strictly-greater keeps the earliest example on ties.
            if best.is_none_or(|(s, _)| similarity > s) {
                best = Some((similarity, &example.tgt_text));
            }
        }
        Ok(json_reply(best.map_or(job.title.as_str(), |(_, tgt)| tgt)))
    }
}

/// Fixture key for a prompt: lowercase hex SHA-256 of the prompt text.
pub fn prompt_hash(prompt_text: &str) -> String {
    sha256_hex(prompt_text.as_bytes())
}

#[derive(Deserialize)]
struct FixtureLine {
    prompt_hash: String,
    response: String,
}

/// Replays canned responses from a JSONL fixture of
/// `{"prompt_hash": …, "response": …}` lines, keyed by [`prompt_hash`] of
/// the rendered prompt. Prompts missing from the fixture get an empty
/// response, which fails the translation contract and surfaces as
/// `parse_failed` — handy for scripting partial-failure scenarios.
pub struct ScriptedBackend {
    responses: HashMap<String, String>,
}

impl ScriptedBackend {
    pub fn from_fixture(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut responses = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: FixtureLine = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                line: i + 1,
                reason: format!("scripted fixture: {e}"),
            })?;
            responses.insert(parsed.prompt_hash, parsed.response);
        }
        Ok(ScriptedBackend { responses })
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, job: &TranslationJob) -> std::result::Result<String, String> {
        Ok(self
            .responses
            .get(&prompt_hash(&job.prompt.text))
            .cloned()
            .unwrap_or_default())
    }
}
