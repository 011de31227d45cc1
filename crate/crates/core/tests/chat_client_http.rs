//! Wire-level contract of the HTTP chat client against a minimal in-process
//! HTTP server: request shape, reply extraction, error statuses, and
//! timeouts.

use faca_core::negotiation::client::{ChatClient, ChatError, ChatMessage, HttpChatClient};
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

/// Read one HTTP request (headers + content-length body) off the stream.
fn read_request(stream: &mut TcpStream) -> String {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    loop {
        let n = stream.read(&mut chunk).expect("read request");
        buf.extend_from_slice(&chunk[..n]);
        if let Some(header_end) = find_header_end(&buf) {
            let headers = String::from_utf8_lossy(&buf[..header_end]).to_string();
            let content_length = headers
                .lines()
                .find_map(|l| {
                    let (name, value) = l.split_once(':')?;
                    name.eq_ignore_ascii_case("content-length")
                        .then(|| value.trim().parse::<usize>().ok())?
                })
                .unwrap_or(0);
            let body_have = buf.len() - header_end;
            if body_have >= content_length {
                return String::from_utf8_lossy(&buf).to_string();
            }
        }
        if n == 0 {
            return String::from_utf8_lossy(&buf).to_string();
        }
    }
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4)
        .position(|w| w == b"\r\n\r\n")
        .map(|p| p + 4)
}

/// Serve exactly one request with the given status and body, reporting the
/// raw request back through a channel.
fn serve_once(
    status_line: &'static str,
    body: String,
    delay: Option<Duration>,
) -> (String, mpsc::Receiver<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let (mut stream, _) = listener.accept().expect("accept");
        let request = read_request(&mut stream);
        let _ = tx.send(request);
        if let Some(d) = delay {
            thread::sleep(d);
        }
        let response = format!(
            "HTTP/1.1 {status_line}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        );
        let _ = stream.write_all(response.as_bytes());
    });
    (format!("http://{addr}/v1/chat/completions"), rx)
}

fn completion_body(content: &str) -> String {
    serde_json::json!({
        "id": "chatcmpl-test",
        "object": "chat.completion",
        "choices": [{
            "index": 0,
            "message": { "role": "assistant", "content": content },
            "finish_reason": "stop"
        }]
    })
    .to_string()
}

#[test]
fn posts_messages_and_reads_the_completion() {
    let (url, rx) = serve_once("200 OK", completion_body("acknowledged, proceeding"), None);
    let client = HttpChatClient::new(url, "gpt-4o-mini", Duration::from_secs(5))
        .with_api_key("test-key-123");
    let reply = client
        .complete(&[
            ChatMessage::system("you negotiate right-of-way"),
            ChatMessage::user("conflict warning"),
        ])
        .expect("completion");
    assert_eq!(reply, "acknowledged, proceeding");

    let request = rx.recv_timeout(Duration::from_secs(5)).unwrap();
    let (head, body) = request.split_once("\r\n\r\n").unwrap();
    assert!(head.starts_with("POST /v1/chat/completions HTTP/1.1"));
    assert!(head.to_ascii_lowercase().contains("authorization: bearer test-key-123"));
    assert!(head.to_ascii_lowercase().contains("content-type: application/json"));
    let payload: serde_json::Value = serde_json::from_str(body).unwrap();
    assert_eq!(payload["model"], "gpt-4o-mini");
    assert_eq!(payload["messages"][0]["role"], "system");
    assert_eq!(payload["messages"][1]["role"], "user");
    assert_eq!(payload["messages"][1]["content"], "conflict warning");
}

#[test]
fn error_status_is_surfaced() {
    let (url, _rx) = serve_once(
        "500 Internal Server Error",
        r#"{"error":{"message":"boom"}}"#.to_string(),
        None,
    );
    let client = HttpChatClient::new(url, "gpt-4o-mini", Duration::from_secs(5));
    match client.complete(&[ChatMessage::user("hello")]) {
        Err(ChatError::Status(code)) => assert_eq!(code, 500),
        other => panic!("expected status error, got {other:?}"),
    }
}

#[test]
fn slow_server_times_out() {
    let (url, _rx) = serve_once(
        "200 OK",
        completion_body("too late"),
        Some(Duration::from_millis(1500)),
    );
    let client = HttpChatClient::new(url, "gpt-4o-mini", Duration::from_millis(150));
    match client.complete(&[ChatMessage::user("hello")]) {
        Err(ChatError::Timeout) => {}
        Err(ChatError::Transport(msg)) => {
            assert!(
                msg.to_ascii_lowercase().contains("time"),
                "unexpected transport error: {msg}"
            );
        }
        other => panic!("expected timeout, got {other:?}"),
    }
}

#[test]
fn malformed_payload_is_a_protocol_error() {
    let (url, _rx) = serve_once("200 OK", r#"{"choices": []}"#.to_string(), None);
    let client = HttpChatClient::new(url, "gpt-4o-mini", Duration::from_secs(5));
    assert!(matches!(
        client.complete(&[ChatMessage::user("hi")]),
        Err(ChatError::Protocol(_))
    ));
}
