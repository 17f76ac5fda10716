//! HTTP provider against a loopback server speaking the chat/embeddings
//! wire format.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;

use ivw_agents::http::{HttpProvider, HttpProviderConfig};
use ivw_agents::{DecodingOptions, Provider};

struct Request {
    path: String,
    authorization: Option<String>,
    body: serde_json::Value,
}

/// Accept `count` requests, answer each with the paired response body, and
/// send what was received back over the channel.
fn serve(responses: Vec<(u16, String)>, tx: mpsc::Sender<Request>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
            let mut content_length = 0usize;
            let mut authorization = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end().to_string();
                if line.is_empty() {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    content_length = v.trim().parse().unwrap_or(0);
                }
                if let Some(v) = line.strip_prefix("Authorization:") {
                    authorization = Some(v.trim().to_string());
                }
            }
            let mut raw = vec![0u8; content_length];
            reader.read_exact(&mut raw).unwrap();
            let body_value: serde_json::Value =
                serde_json::from_slice(&raw).unwrap_or(serde_json::Value::Null);
            tx.send(Request { path, authorization, body: body_value }).unwrap();
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            let mut stream = reader.into_inner();
            stream.write_all(reply.as_bytes()).unwrap();
            stream.flush().unwrap();
        }
    });
    format!("http://{addr}")
}

fn config(endpoint: String) -> HttpProviderConfig {
    HttpProviderConfig {
        endpoint,
        model: "test-model".into(),
        embed_model: "test-embed".into(),
        api_key_env: "IVW_TEST_KEY_UNSET".into(),
        requests_per_second: 0.0, // no throttling in tests
        max_retries: 1,
        timeout_seconds: 5,
    }
}

#[test]
fn completion_round_trip_sends_deterministic_decoding() {
    let (tx, rx) = mpsc::channel();
    let body = serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": "Answer = [Valid]"}}]
    })
    .to_string();
    let endpoint = serve(vec![(200, body)], tx);
    let provider = HttpProvider::new(config(endpoint)).unwrap();
    let response = provider.complete("check this", &DecodingOptions::default()).unwrap();
    assert_eq!(response, "Answer = [Valid]");

    let request = rx.recv().unwrap();
    assert_eq!(request.path, "/chat/completions");
    assert_eq!(request.body["model"], "test-model");
    assert_eq!(request.body["temperature"], 0.0);
    assert_eq!(request.body["top_p"], 1.0);
    assert_eq!(request.body["messages"][0]["content"], "check this");
    // no key in the environment, no auth header
    assert!(request.authorization.is_none());
}

#[test]
fn embedding_round_trip() {
    let (tx, rx) = mpsc::channel();
    let body = serde_json::json!({"data": [{"embedding": [0.25, -0.5, 1.0]}]}).to_string();
    let endpoint = serve(vec![(200, body)], tx);
    let provider = HttpProvider::new(config(endpoint)).unwrap();
    assert!(provider.has_embedding());
    let vector = provider.embed("some text").unwrap();
    assert_eq!(vector, vec![0.25, -0.5, 1.0]);
    let request = rx.recv().unwrap();
    assert_eq!(request.path, "/embeddings");
    assert_eq!(request.body["model"], "test-embed");
    assert_eq!(request.body["input"], "some text");
}

#[test]
fn server_errors_are_retried_and_counted() {
    let (tx, rx) = mpsc::channel();
    let ok = serde_json::json!({
        "choices": [{"message": {"content": "recovered"}}]
    })
    .to_string();
    let endpoint = serve(vec![(500, "{}".into()), (200, ok)], tx);
    let provider = HttpProvider::new(config(endpoint)).unwrap();
    let response = provider.complete("flaky", &DecodingOptions::default()).unwrap();
    assert_eq!(response, "recovered");
    assert_eq!(rx.iter().count(), 2, "one failure plus one retry");
}

#[test]
fn hard_client_errors_fail_fast_with_attempt_count() {
    let (tx, _rx) = mpsc::channel();
    let endpoint = serve(vec![(404, "{}".into())], tx);
    let provider = HttpProvider::new(config(endpoint)).unwrap();
    let err = provider.complete("nope", &DecodingOptions::default()).unwrap_err();
    match err {
        ivw_agents::AgentError::Transport { attempts, message } => {
            assert_eq!(attempts, 1, "4xx must not be retried");
            assert!(message.contains("404"), "{message}");
        }
        other => panic!("unexpected error {other:?}"),
    }
}
