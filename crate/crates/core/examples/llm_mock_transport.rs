//! The chat-completion client against a scripted transport: one transient
//! 503, then a reply. Point `CORE_LLM_ENDPOINT` at a real server and use
//! `LlmClient::from_env` for live calls.
//!
//!     cargo run --example llm_mock_transport

use std::sync::Arc;
use std::time::Duration;

use core_selftrain::llm::{ChatModel, ChatRequest, EndpointConfig, HttpReply, LlmClient, MockTransport};

fn main() -> anyhow::Result<()> {
    let transport = Arc::new(MockTransport::new());
    transport.push(Ok(HttpReply { status: 503, body: "busy".into() }));
    transport.push_text("1. Click on a UI element 'Pro Expense'");

    let mut cfg = EndpointConfig::new("http://localhost:8000/v1");
    cfg.backoff_base = Duration::from_millis(10);
    let client = LlmClient::new(cfg, transport.clone(), 4);

    let reply = client.chat(&ChatRequest::user("demo-model", "Which steps matter?"))?;
    println!("reply after {} attempts: {}", reply.attempts, reply.text);
    println!("request body: {}", transport.requests()[0]);
    Ok(())
}
