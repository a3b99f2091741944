use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::time::Duration;

use core_selftrain::llm::{completion_body, ChatModel, ChatRequest, EndpointConfig, HttpTransport, LlmClient, LlmError};

/// Serves one canned `(status, body)` per connection and returns the request bodies seen.
fn serve(replies: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<(String, String)>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let mut seen = Vec::new();
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut len = 0;
            let mut auth = String::new();
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                if h.trim().is_empty() {
                    break;
                }
                let lower = h.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = h.trim().to_string();
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            seen.push((format!("{} {}", request_line.trim(), auth), String::from_utf8(buf).unwrap()));
            let mut out = stream;
            write!(
                out,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
        seen
    });
    (url, handle)
}

fn client(url: String) -> LlmClient {
    let mut cfg = EndpointConfig::new(url);
    cfg.api_key = Some("sk-test".into());
    cfg.backoff_base = Duration::from_millis(5);
    cfg.timeout = Duration::from_secs(5);
    LlmClient::new(cfg, Arc::new(HttpTransport::new().unwrap()), 2)
}

#[test]
fn retries_server_errors_over_http() {
    let (url, server) = serve(vec![(503, "busy".into()), (200, completion_body("hello").to_string())]);
    let resp = client(url).chat(&ChatRequest::user("m", "hi")).unwrap();
    assert_eq!((resp.text.as_str(), resp.attempts), ("hello", 2));
    let seen = server.join().unwrap();
    assert_eq!(seen.len(), 2);
    assert!(seen[0].0.starts_with("POST /v1/chat/completions"));
    assert!(seen[0].0.ends_with("Bearer sk-test"));
    let body: serde_json::Value = serde_json::from_str(&seen[1].1).unwrap();
    assert_eq!(body["messages"][0]["content"], "hi");
}

#[test]
fn client_errors_are_not_retried() {
    let (url, server) = serve(vec![(400, "{}".into())]);
    let err = client(url).chat(&ChatRequest::user("m", "hi")).unwrap_err();
    assert!(matches!(err, LlmError::HttpStatus(400)), "{err:?}");
    assert_eq!(server.join().unwrap().len(), 1);
}

#[test]
fn malformed_body_is_reported() {
    let (url, server) = serve(vec![(200, "{\"choices\":[]}".into())]);
    let err = client(url).chat(&ChatRequest::user("m", "hi")).unwrap_err();
    assert!(matches!(err, LlmError::BadResponseShape(_)), "{err:?}");
    server.join().unwrap();
}
