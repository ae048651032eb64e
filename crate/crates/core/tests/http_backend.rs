//! Tests the HTTP chat backend against a real socket: a hand-rolled
//! loopback stub server captures what the backend sends and answers with
//! canned responses, so the wire format, auth handling, retry/backoff, and
//! parallel batching are all exercised end to end.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use titlerag::corpus::LanguagePair;
use titlerag::llm::{
    make_backend, translate_batch, translate_job, BackendConfig, TranslationJob, TranslationStatus,
};
use titlerag::prompting::{RenderedPrompt, TemplateId};

fn read_http_request(stream: &mut TcpStream) -> (String, String) {
    let mut data = Vec::new();
    let mut chunk = [0u8; 4096];
    let header_end = loop {
        if let Some(pos) = data.windows(4).position(|w| w == b"\r\n\r\n") {
            break pos + 4;
        }
        let n = stream.read(&mut chunk).expect("read headers");
        assert!(n > 0, "peer closed before end of headers");
        data.extend_from_slice(&chunk[..n]);
    };
    let headers = String::from_utf8_lossy(&data[..header_end]).to_string();
    let content_length: usize = headers
        .lines()
        .find_map(|line| {
            let (name, value) = line.split_once(':')?;
            name.eq_ignore_ascii_case("content-length")
                .then(|| value.trim().parse().ok())?
        })
        .unwrap_or(0);
    while data.len() < header_end + content_length {
        let n = stream.read(&mut chunk).expect("read body");
        assert!(n > 0, "peer closed mid-body");
        data.extend_from_slice(&chunk[..n]);
    }
    let body = String::from_utf8_lossy(&data[header_end..header_end + content_length]).to_string();
    (headers, body)
}

fn write_http_response(stream: &mut TcpStream, status: u16, body: &str) {
    let reason = match status {
        200 => "OK",
        500 => "Internal Server Error",
        _ => "Whatever",
    };
    let response = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(response.as_bytes()).unwrap();
    stream.flush().unwrap();
}

type RequestLog = Arc<Mutex<Vec<(String, String)>>>;

/// Answers one connection per canned `(status, body)`, in order, logging
/// each request's headers and body. Join the handle to be sure the client
/// really made every expected request.
fn canned_server(responses: Vec<(u16, String)>) -> (String, RequestLog, JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let log: RequestLog = Arc::new(Mutex::new(Vec::new()));
    let sink = Arc::clone(&log);
    let handle = std::thread::spawn(move || {
        for (status, body) in responses {
            let (mut stream, _) = listener.accept().expect("accept");
            sink.lock().unwrap().push(read_http_request(&mut stream));
            write_http_response(&mut stream, status, &body);
        }
    });
    (endpoint, log, handle)
}

/// Handles `n` connections concurrently, replying to each with the
/// uppercased prompt it received — completion order scrambles, input
/// order must not.
fn echo_upper_server(n: usize) -> (String, JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let mut handlers = Vec::new();
        for _ in 0..n {
            let (mut stream, _) = listener.accept().expect("accept");
            handlers.push(std::thread::spawn(move || {
                let (_, body) = read_http_request(&mut stream);
                let request: serde_json::Value = serde_json::from_str(&body).unwrap();
                let content = request["messages"][0]["content"].as_str().unwrap();
                std::thread::sleep(Duration::from_millis(10));
                let translation = serde_json::json!({ "translation": content.to_uppercase() });
                write_http_response(&mut stream, 200, &chat_body(&translation.to_string()));
            }));
        }
        for h in handlers {
            h.join().unwrap();
        }
    });
    (endpoint, handle)
}

/// A chat-completion response whose assistant message is `content`.
fn chat_body(content: &str) -> String {
    serde_json::json!({
        "id": "stub",
        "choices": [{ "index": 0, "message": { "role": "assistant", "content": content } }]
    })
    .to_string()
}

fn translation_content(text: &str) -> String {
    serde_json::json!({ "translation": text }).to_string()
}

fn http_config(endpoint: String, api_key_env: &str, max_retries: u32, parallelism: usize) -> BackendConfig {
    BackendConfig::HttpChat {
        endpoint,
        model: "test-model".to_string(),
        api_key_env: api_key_env.to_string(),
        timeout_secs: 10,
        max_retries,
        parallelism,
        temperature: 0.25,
    }
}

fn job(segment_index: usize, text: &str) -> TranslationJob {
    TranslationJob {
        segment_index,
        prompt: RenderedPrompt {
            text: text.to_string(),
            template_id: TemplateId::A,
            example_ids: Vec::new(),
            lang: LanguagePair::new("en", "de").unwrap(),
            seed: None,
        },
        title: text.to_string(),
        examples: Vec::new(),
    }
}

#[test]
fn sends_chat_request_with_bearer_auth_and_parses_the_reply() {
    std::env::set_var("TITLERAG_TEST_KEY_HAPPY", "sekrit-123");
    let (endpoint, log, server) =
        canned_server(vec![(200, chat_body(&translation_content("Rote Tasse")))]);
    let backend = make_backend(&http_config(endpoint, "TITLERAG_TEST_KEY_HAPPY", 0, 1)).unwrap();

    let record = translate_job(&job(0, "Translate: Red Mug"), backend.as_ref());
    assert_eq!(record.status, TranslationStatus::Ok);
    assert_eq!(record.translation.as_deref(), Some("Rote Tasse"));
    assert_eq!(record.attempts, 1);
    server.join().unwrap();

    let requests = log.lock().unwrap();
    assert_eq!(requests.len(), 1);
    let (headers, body) = &requests[0];
    assert!(
        headers.to_lowercase().contains("authorization: bearer sekrit-123"),
        "API key from the environment must travel as a bearer token:\n{headers}"
    );
    let sent: serde_json::Value = serde_json::from_str(body).unwrap();
    assert_eq!(sent["model"], "test-model");
    assert_eq!(sent["temperature"], 0.25);
    assert_eq!(sent["messages"][0]["role"], "user");
    assert_eq!(sent["messages"][0]["content"], "Translate: Red Mug");
}

#[test]
fn no_auth_header_when_the_key_variable_is_unset() {
    let (endpoint, log, server) = canned_server(vec![(200, chat_body(&translation_content("x")))]);
    let backend =
        make_backend(&http_config(endpoint, "TITLERAG_TEST_KEY_NOWHERE_SET", 0, 1)).unwrap();

    let record = translate_job(&job(0, "t"), backend.as_ref());
    assert_eq!(record.status, TranslationStatus::Ok);
    server.join().unwrap();

    let requests = log.lock().unwrap();
    assert!(
        !requests[0].0.to_lowercase().contains("authorization"),
        "unset key must mean no Authorization header at all:\n{}",
        requests[0].0
    );
}

#[test]
fn server_errors_are_retried_with_real_backoff() {
    let (endpoint, _, server) = canned_server(vec![
        (500, "overloaded".to_string()),
        (500, "still overloaded".to_string()),
        (200, chat_body(&translation_content("finally"))),
    ]);
    let backend = make_backend(&http_config(endpoint, "", 2, 1)).unwrap();

    let start = Instant::now();
    let record = translate_job(&job(0, "t"), backend.as_ref());
    let elapsed = start.elapsed();
    assert_eq!(record.status, TranslationStatus::Ok);
    assert_eq!(record.translation.as_deref(), Some("finally"));
    assert_eq!(record.attempts, 3);
    assert!(
        elapsed >= Duration::from_millis(600),
        "two retries must back off 200ms then 400ms, got {elapsed:?}"
    );
    server.join().unwrap();
}

#[test]
fn exhausted_retries_surface_the_http_status() {
    let (endpoint, _, server) = canned_server(vec![
        (500, "boom".to_string()),
        (500, "boom".to_string()),
    ]);
    let backend = make_backend(&http_config(endpoint, "", 1, 1)).unwrap();

    let record = translate_job(&job(0, "t"), backend.as_ref());
    assert_eq!(record.status, TranslationStatus::TransportFailed);
    assert_eq!(record.translation, None);
    assert_eq!(record.attempts, 2, "first try plus max_retries");
    assert!(record.raw_response.contains("HTTP 500"), "{}", record.raw_response);
    assert!(record.raw_response.contains("boom"), "{}", record.raw_response);
    server.join().unwrap();
}

#[test]
fn unparseable_model_output_earns_one_re_ask() {
    let (endpoint, _, server) = canned_server(vec![
        (200, chat_body("happy to help! no JSON though")),
        (200, chat_body(&translation_content("second time lucky"))),
    ]);
    let backend = make_backend(&http_config(endpoint, "", 0, 1)).unwrap();

    let record = translate_job(&job(0, "t"), backend.as_ref());
    assert_eq!(record.status, TranslationStatus::Ok);
    assert_eq!(record.translation.as_deref(), Some("second time lucky"));
    assert_eq!(record.attempts, 2);
    server.join().unwrap();
}

#[test]
fn a_non_chat_response_body_counts_as_transport_and_is_retried() {
    let (endpoint, _, server) = canned_server(vec![
        (200, "<html>proxy error page</html>".to_string()),
        (200, chat_body(&translation_content("ok"))),
    ]);
    let backend = make_backend(&http_config(endpoint, "", 1, 1)).unwrap();

    let record = translate_job(&job(0, "t"), backend.as_ref());
    assert_eq!(record.status, TranslationStatus::Ok);
    assert_eq!(record.attempts, 2);
    server.join().unwrap();
}

#[test]
fn parallel_batches_share_one_backend_and_keep_input_order() {
    let (endpoint, server) = echo_upper_server(8);
    let config = http_config(endpoint, "", 0, 4);
    let backend = make_backend(&config).unwrap();

    let jobs: Vec<TranslationJob> = (0..8).map(|i| job(i, &format!("title-{i}"))).collect();
    let records = translate_batch(&jobs, backend.as_ref(), config.parallelism());
    server.join().unwrap();

    assert_eq!(records.len(), 8);
    for (i, record) in records.iter().enumerate() {
        assert_eq!(record.segment_index, i);
        assert_eq!(record.status, TranslationStatus::Ok, "{}", record.raw_response);
        assert_eq!(record.translation.as_deref(), Some(format!("TITLE-{i}").as_str()));
    }
}
