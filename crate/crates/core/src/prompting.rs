//! Prompt template rendering and few-shot example selection.
//!
//! The two templates live under `assets/` and are treated as experimental
//! constants: placeholder substitution is the only transformation rendering
//! may apply, and the golden-file tests pin every byte, including each
//! template's idiosyncratic spacing and the spelling "translaton" in
//! template B. Any variation must be a new template id — A and B are never
//! edited.
//!
//! Template A (baseline) takes no examples; template B inserts one
//! `Example i:` block per provided pair, numbered from 1, in the order
//! given — retrieval rank order for RAG, sampling order for RAND. Example
//! text is inserted verbatim, unescaped: a title containing the literal
//! string "Example" is legal.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{BilingualPair, LanguagePair};
use crate::error::{Error, Result};
use crate::retrieval::RetrievalIndex;

const TEMPLATE_A: &str = include_str!("../assets/template_a.txt");
const TEMPLATE_B: &str = include_str!("../assets/template_b.txt");

const SRC_LANG_PH: &str = "<source language e.g. English>";
const TITLE_PH: &str = "<title in the source language>";
const TGT_LANG_PH: &str = "<target language>";

/// End of template B's fixed header (the line introducing the examples).
const B_HEADER_END: &str = "Below are a few translaton examples:\n";
/// Start of template B's fixed footer (the blank line before instructions).
const B_FOOTER_START: &str = "\nHere are instructions on how to translate: ";

/// How few-shot examples are chosen for a prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShotMode {
    /// Template A, no examples.
    Baseline,
    /// Template B with k randomly sampled examples.
    Rand(usize),
    /// Template B with the k BM25-retrieved examples.
    Rag(usize),
}

impl ShotMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            ShotMode::Rand(0) | ShotMode::Rag(0) => {
                Err(Error::InvalidParameter("shot count k must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            ShotMode::Baseline => 0,
            ShotMode::Rand(k) | ShotMode::Rag(k) => *k,
        }
    }

    /// Row label used in reports, e.g. `RAG 5-shot`.
    pub fn label(&self) -> String {
        match self {
            ShotMode::Baseline => "Baseline".to_string(),
            ShotMode::Rand(k) => format!("RAND {k}-shot"),
            ShotMode::Rag(k) => format!("RAG {k}-shot"),
        }
    }
}

impl fmt::Display for ShotMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShotMode::Baseline => f.write_str("baseline"),
            ShotMode::Rand(k) => write!(f, "rand-{k}"),
            ShotMode::Rag(k) => write!(f, "rag-{k}"),
        }
    }
}

impl FromStr for ShotMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_lowercase();
        let mode = if lower == "baseline" {
            ShotMode::Baseline
        } else if let Some(k) = lower.strip_prefix("rand-") {
            ShotMode::Rand(k.parse().map_err(|_| bad_mode(s))?)
        } else if let Some(k) = lower.strip_prefix("rag-") {
            ShotMode::Rag(k.parse().map_err(|_| bad_mode(s))?)
        } else {
            return Err(bad_mode(s));
        };
        mode.validate()?;
        Ok(mode)
    }
}

fn bad_mode(s: &str) -> Error {
    Error::Config(format!("unknown shot mode {s:?}: expected baseline, rand-K, or rag-K"))
}

impl Serialize for ShotMode {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ShotMode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which template produced a prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateId {
    A,
    B,
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TemplateId::A => "A",
            TemplateId::B => "B",
        })
    }
}

/// A fully substituted prompt plus the metadata needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub template_id: TemplateId,
    /// Corpus ids of the inserted examples; empty exactly for template A.
    pub example_ids: Vec<u32>,
    pub lang: LanguagePair,
    /// Sampling seed when examples were randomly drawn.
    pub seed: Option<u64>,
}

/// Language display names used in prompts (`en` → `English`). Ships with
/// the eight built-in languages; extensible via configuration.
#[derive(Debug, Clone)]
pub struct LanguageNames {
    names: HashMap<String, String>,
}

impl Default for LanguageNames {
    fn default() -> Self {
        let names = [
            ("en", "English"),
            ("nl", "Dutch"),
            ("de", "German"),
            ("it", "Italian"),
            ("tr", "Turkish"),
            ("cs", "Czech"),
            ("pl", "Polish"),
            ("sv", "Swedish"),
        ]
        .iter()
        .map(|(code, name)| (code.to_string(), name.to_string()))
        .collect();
        LanguageNames { names }
    }
}

impl LanguageNames {
    pub fn name(&self, code: &str) -> Result<&str> {
        self.names
            .get(code)
            .map(String::as_str)
            .ok_or_else(|| Error::MissingLanguageName(code.to_string()))
    }

    pub fn insert(&mut self, code: &str, name: &str) {
        self.names.insert(code.to_lowercase(), name.to_string());
    }
}

fn check_title(title: &str) -> Result<()> {
    if title.trim().is_empty() {
        return Err(Error::EmptyTitle);
    }
    Ok(())
}

/// Render template A (zero-shot baseline).
pub fn render_baseline(
    title: &str,
    lang: &LanguagePair,
    names: &LanguageNames,
) -> Result<RenderedPrompt> {
    check_title(title)?;
    let text = TEMPLATE_A
        .replace(SRC_LANG_PH, names.name(lang.src())?)
        .replace(TITLE_PH, title)
        .replace(TGT_LANG_PH, names.name(lang.tgt())?);
    Ok(RenderedPrompt {
        text,
        template_id: TemplateId::A,
        example_ids: Vec::new(),
        lang: lang.clone(),
        seed: None,
    })
}

fn template_b_sections() -> (&'static str, &'static str) {
    let header_end = TEMPLATE_B
        .find(B_HEADER_END)
        .expect("template B header marker")
        + B_HEADER_END.len();
    let footer_start = TEMPLATE_B.find(B_FOOTER_START).expect("template B footer marker");
    (&TEMPLATE_B[..header_end], &TEMPLATE_B[footer_start..])
}

fn example_block(number: usize, src: &str, tgt: &str) -> String {
    format!("    Example {number}: source: {src}, \n               translation: {tgt}\n")
}

/// Render template B with the given examples, in order, numbered from 1.
/// `seed` records the sampling seed when the examples were drawn randomly.
pub fn render_fewshot(
    title: &str,
    lang: &LanguagePair,
    names: &LanguageNames,
    examples: &[BilingualPair],
    seed: Option<u64>,
) -> Result<RenderedPrompt> {
    check_title(title)?;
    if examples.is_empty() {
        return Err(Error::NoExamples);
    }
    let (header, footer) = template_b_sections();
    let mut text = String::with_capacity(TEMPLATE_B.len() + title.len());
    text.push_str(header);
    for (i, example) in examples.iter().enumerate() {
        text.push_str(&example_block(i + 1, &example.src_text, &example.tgt_text));
    }
    text.push_str(footer);
    let text = text
        .replace(SRC_LANG_PH, names.name(lang.src())?)
        .replace(TITLE_PH, title)
        .replace(TGT_LANG_PH, names.name(lang.tgt())?);
    Ok(RenderedPrompt {
        text,
        template_id: TemplateId::B,
        example_ids: examples.iter().map(|e| e.id).collect(),
        lang: lang.clone(),
        seed,
    })
}

/// Choose few-shot examples for one title: none (baseline), the top-k
/// retrieved pairs in rank order (RAG), or a seeded random sample from the
/// index's stored pairs (RAND). RAG may return fewer than k when fewer
/// documents match; callers record the shortfall.
pub fn select_examples(
    mode: ShotMode,
    index: &RetrievalIndex,
    title: &str,
    seed: u64,
) -> Result<Vec<BilingualPair>> {
    mode.validate()?;
    match mode {
        ShotMode::Baseline => Ok(Vec::new()),
        ShotMode::Rag(k) => Ok(index.search_topk(title, k).into_iter().map(|h| h.pair).collect()),
        ShotMode::Rand(k) => crate::corpus::sample_random(index.pairs(), index.scope(), k, seed),
    }
}
