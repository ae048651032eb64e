//! Translation backends and the JSON translation contract.
//!
//! A backend turns a rendered prompt into a raw response string; everything
//! else — retries, the one re-ask after an unparseable response, extracting
//! the `"translation"` value — lives here and is shared by the real HTTP
//! backend and the deterministic mocks. Failures are never thrown out of
//! [`translate_job`]: a batch run records per-segment status and keeps
//! going.

mod http;
mod mock;

pub use http::HttpChatBackend;
pub use mock::{prompt_hash, CopyBestBackend, EchoBackend, ScriptedBackend};

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::BilingualPair;
use crate::error::{Error, Result};
use crate::prompting::RenderedPrompt;

fn default_api_key_env() -> String {
    "TITLERAG_API_KEY".to_string()
}

fn default_timeout_secs() -> u64 {
    30
}

fn default_max_retries() -> u32 {
    2
}

fn default_parallelism() -> usize {
    1
}

/// Declarative backend selection, as it appears in run configuration files.
/// The API key is always named by environment variable — config files never
/// hold secrets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    /// Chat-completion-style HTTP endpoint (single user message, greedy
    /// decoding by default).
    HttpChat {
        endpoint: String,
        model: String,
        #[serde(default = "default_api_key_env")]
        api_key_env: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
        #[serde(default = "default_max_retries")]
        max_retries: u32,
        #[serde(default = "default_parallelism")]
        parallelism: usize,
        #[serde(default)]
        temperature: f64,
    },
    /// Replies with the source title itself.
    MockEcho,
    /// Replies with the target of the provided example whose source is
    /// closest to the title (the title itself when there are no examples).
    MockCopyBest,
    /// Replies from a JSONL fixture keyed by prompt hash.
    MockScripted { fixture: PathBuf },
}

impl BackendConfig {
    pub fn validate(&self) -> Result<()> {
        if let BackendConfig::HttpChat {
            endpoint,
            model,
            parallelism,
            ..
        } = self
        {
            if endpoint.is_empty() {
                return Err(Error::Config("http_chat backend requires an endpoint".into()));
            }
            if model.is_empty() {
                return Err(Error::Config("http_chat backend requires a model name".into()));
            }
            if *parallelism < 1 {
                return Err(Error::Config("parallelism must be at least 1".into()));
            }
        }
        Ok(())
    }

    /// Max in-flight requests a batch run may use with this backend.
    pub fn parallelism(&self) -> usize {
        match self {
            BackendConfig::HttpChat { parallelism, .. } => (*parallelism).max(1),
            _ => 1,
        }
    }
}

/// Everything a backend may look at for one request. Mocks use the
/// structured fields (title, examples); the HTTP backend sends only the
/// prompt text. The structured fields are exactly what rendering embedded
/// in the text, so every backend remains a pure function of the prompt.
#[derive(Debug, Clone)]
pub struct TranslationJob {
    pub segment_index: usize,
    pub prompt: RenderedPrompt,
    pub title: String,
    pub examples: Vec<BilingualPair>,
}

/// One model call. `Err` carries a transport-level description and is
/// retryable; a delivered-but-useless response is an `Ok` whose payload
/// simply won't parse.
pub trait Backend: Send + Sync {
    fn complete(&self, job: &TranslationJob) -> std::result::Result<String, String>;

    /// Additional attempts allowed per request after the first.
    fn max_retries(&self) -> u32 {
        0
    }

    /// Base delay for exponential backoff between retries.
    fn backoff_base(&self) -> Duration {
        Duration::from_millis(200)
    }
}

/// Build the backend described by `cfg`. Setup problems (missing fixture,
/// bad endpoint) fail here, not during the run.
pub fn make_backend(cfg: &BackendConfig) -> Result<Box<dyn Backend>> {
    cfg.validate()?;
    Ok(match cfg {
        BackendConfig::HttpChat {
            endpoint,
            model,
            api_key_env,
            timeout_secs,
            max_retries,
            temperature,
            ..
        } => Box::new(HttpChatBackend::new(
            endpoint,
            model,
            api_key_env,
            Duration::from_secs(*timeout_secs),
            *max_retries,
            *temperature,
        )?),
        BackendConfig::MockEcho => Box::new(EchoBackend),
        BackendConfig::MockCopyBest => Box::new(CopyBestBackend::default()),
        BackendConfig::MockScripted { fixture } => Box::new(ScriptedBackend::from_fixture(fixture)?),
    })
}

/// Terminal state of one segment's translation attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslationStatus {
    Ok,
    ParseFailed,
    TransportFailed,
}

/// The full audit trail for one segment: what was asked, what came back,
/// and what was extracted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub segment_index: usize,
    pub prompt: RenderedPrompt,
    /// Last response received; the transport error text when nothing was.
    pub raw_response: String,
    pub translation: Option<String>,
    pub status: TranslationStatus,
    /// Total requests issued, including retries and the re-ask.
    pub attempts: u32,
}

/// Why a response failed the translation contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("no JSON object in response")]
    NoJsonObject,
    #[error("JSON object lacks a \"translation\" key")]
    MissingKey,
    #[error("\"translation\" value is not a string")]
    NotAString,
}

/// Extract the `"translation"` string from a raw model response. Models
/// often wrap their JSON in prose, so this scans for the first balanced,
/// *valid* JSON object in the text (brace matching is string- and
/// escape-aware; spans that balance but aren't JSON — like an echoed
/// `{"translation": <translation>}` scaffold — are skipped). The key
/// lookup is case-sensitive.
pub fn parse_translation(raw: &str) -> std::result::Result<String, ParseError> {
    let mut search_from = 0;
    while let Some(offset) = raw[search_from..].find('{') {
        let start = search_from + offset;
        search_from = start + 1;
        let Some(candidate) = balanced_object(&raw[start..]) else {
            continue;
        };
        let Ok(value) = serde_json::from_str::<serde_json::Value>(candidate) else {
            continue;
        };
        let serde_json::Value::Object(map) = value else {
            continue;
        };
        return match map.get("translation") {
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(ParseError::NotAString),
            None => Err(ParseError::MissingKey),
        };
    }
    Err(ParseError::NoJsonObject)
}

/// The shortest balanced `{…}` span starting at the first byte of `text`
/// (which must be `{`), honoring JSON string and escape rules.
fn balanced_object(text: &str) -> Option<&str> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, ch) in text.char_indices() {
        if in_string {
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == '"' {
                in_string = false;
            }
            continue;
        }
        match ch {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[..i + ch.len_utf8()]);
                }
            }
            _ => {}
        }
    }
    None
}

fn backoff_delay(base: Duration, completed_attempts: u32) -> Duration {
    base.saturating_mul(1u32 << (completed_attempts - 1).min(10))
}

/// Issue one request with transport retries. Returns the response (or the
/// final transport error) and how many attempts were spent.
fn issue_with_retries(
    backend: &dyn Backend,
    job: &TranslationJob,
) -> (std::result::Result<String, String>, u32) {
    let mut attempt = 0u32;
    loop {
        attempt += 1;
        match backend.complete(job) {
            Ok(text) => return (Ok(text), attempt),
            Err(_) if attempt <= backend.max_retries() => {
                std::thread::sleep(backoff_delay(backend.backoff_base(), attempt));
            }
            Err(e) => return (Err(e), attempt),
        }
    }
}

/// Translate one segment. Transport errors are retried with exponential
/// backoff; an unparseable response earns exactly one re-ask. Every outcome
/// comes back as a record — this function does not fail.
pub fn translate_job(job: &TranslationJob, backend: &dyn Backend) -> TranslationRecord {
    let record = |raw: String, translation: Option<String>, status, attempts| TranslationRecord {
        segment_index: job.segment_index,
        prompt: job.prompt.clone(),
        raw_response: raw,
        translation,
        status,
        attempts,
    };

    let (first, mut attempts) = issue_with_retries(backend, job);
    let first_raw = match first {
        Err(transport) => {
            return record(transport, None, TranslationStatus::TransportFailed, attempts);
        }
        Ok(raw) => raw,
    };
    if let Ok(translation) = parse_translation(&first_raw) {
        return record(first_raw, Some(translation), TranslationStatus::Ok, attempts);
    }

    // One re-ask. If even its transport fails, the first (unparseable)
    // response is still the best artifact to keep.
    let (second, more) = issue_with_retries(backend, job);
    attempts += more;
    match second {
        Ok(second_raw) => match parse_translation(&second_raw) {
            Ok(translation) => record(second_raw, Some(translation), TranslationStatus::Ok, attempts),
            Err(_) => record(second_raw, None, TranslationStatus::ParseFailed, attempts),
        },
        Err(_) => record(first_raw, None, TranslationStatus::ParseFailed, attempts),
    }
}

/// Translate a batch with up to `parallelism` in-flight requests. Results
/// always come back in input order, whatever order requests complete in.
pub fn translate_batch(
    jobs: &[TranslationJob],
    backend: &dyn Backend,
    parallelism: usize,
) -> Vec<TranslationRecord> {
    let workers = parallelism.max(1).min(jobs.len().max(1));
    if workers <= 1 {
        return jobs.iter().map(|job| translate_job(job, backend)).collect();
    }

    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<TranslationRecord>>> =
        jobs.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let result = translate_job(&jobs[i], backend);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every slot filled"))
        .collect()
}
