//! Chat-completion HTTP backend.
//!
//! Wire format is the ubiquitous chat-completion JSON: the request carries
//! the model name, a single user message holding the prompt, and a
//! temperature (0 by default — deterministic decoding suits evaluation);
//! the response's first choice carries the model output at
//! `choices[0].message.content`. The API key is read from the environment
//! variable named in the backend config, never from the config itself, and
//! the Authorization header is simply omitted when the variable is unset
//! (local stubs don't need one).

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::{Backend, TranslationJob};

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

pub struct HttpChatBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    max_retries: u32,
    temperature: f64,
}

impl HttpChatBackend {
    pub fn new(
        endpoint: &str,
        model: &str,
        api_key_env: &str,
        timeout: Duration,
        max_retries: u32,
        temperature: f64,
    ) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        let api_key = if api_key_env.is_empty() {
            None
        } else {
            std::env::var(api_key_env).ok().filter(|k| !k.is_empty())
        };
        Ok(HttpChatBackend {
            client,
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key,
            max_retries,
            temperature,
        })
    }
}

impl Backend for HttpChatBackend {
    fn complete(&self, job: &TranslationJob) -> std::result::Result<String, String> {
        let body = ChatRequest {
            model: &self.model,
            messages: [ChatMessage {
                role: "user",
                content: &job.prompt.text,
            }],
            temperature: self.temperature,
        };
        let mut request = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| format!("request failed: {e}"))?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            return Err(format!("HTTP {status}: {text}"));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| format!("malformed chat response: {e}"))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| "chat response has no choices".to_string())
    }

    fn max_retries(&self) -> u32 {
        self.max_retries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_body_shape() {
        let body = ChatRequest {
            model: "test-model",
            messages: [ChatMessage { role: "user", content: "translate this" }],
            temperature: 0.0,
        };
        let json = serde_json::to_value(&body).unwrap();
        assert_eq!(json["model"], "test-model");
        assert_eq!(json["temperature"], 0.0);
        assert_eq!(json["messages"][0]["role"], "user");
        assert_eq!(json["messages"][0]["content"], "translate this");
    }

    #[test]
    fn response_content_extraction() {
        let parsed: ChatResponse = serde_json::from_str(
            r#"{"id": "x", "choices": [{"index": 0, "message": {"role": "assistant", "content": "{\"translation\": \"ok\"}"}}]}"#,
        )
        .unwrap();
        assert_eq!(parsed.choices[0].message.content, "{\"translation\": \"ok\"}");
    }

    #[test]
    fn api_key_only_from_environment() {
        // The constructor takes a variable *name*; an unset or empty name
        // must simply disable auth rather than leak anything.
        let backend = HttpChatBackend::new(
            "http://127.0.0.1:9/v1/chat/completions",
            "m",
            "TITLERAG_TEST_KEY_THAT_IS_NOT_SET",
            Duration::from_secs(1),
            0,
            0.0,
        )
        .unwrap();
        assert!(backend.api_key.is_none());

        let no_name = HttpChatBackend::new(
            "http://127.0.0.1:9/v1/chat/completions",
            "m",
            "",
            Duration::from_secs(1),
            0,
            0.0,
        )
        .unwrap();
        assert!(no_name.api_key.is_none());
    }
}
