//! Chat-completion client: the trait the negotiator talks through, an HTTP
//! implementation for OpenAI-compatible endpoints, and an in-process mock
//! for contract tests.

use serde::{Deserialize, Serialize};
use std::sync::Mutex;
use std::time::Duration;
use thiserror::Error;

/// Env var holding the bearer token for the live endpoint.
pub const API_KEY_ENV: &str = "FACA_LLM_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("service returned status {0}")]
    Status(u16),
    #[error("malformed completion payload: {0}")]
    Protocol(String),
    #[error("mock script exhausted")]
    ScriptExhausted,
}

/// Anything that can turn a message list into a reply. Implementations must
/// be usable from multiple threads; batch runs may hold several sessions
/// with requests in flight at once.
pub trait ChatClient: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ChatError>;
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: AssistantMessage,
}

#[derive(Deserialize)]
struct AssistantMessage {
    content: Option<String>,
}

/// Blocking client for a chat-completions endpoint.
///
/// Posts `{model, messages}` to `url` and reads
/// `choices[0].message.content` back. The bearer token comes from the
/// `FACA_LLM_API_KEY` environment variable when present.
pub struct HttpChatClient {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
}

impl HttpChatClient {
    pub fn new(url: impl Into<String>, model: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpChatClient {
            agent,
            url: url.into(),
            model: model.into(),
            api_key: std::env::var(API_KEY_ENV).ok(),
        }
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ChatError> {
        let body = serde_json::to_string(&CompletionRequest {
            model: &self.model,
            messages,
        })
        .map_err(|e| ChatError::Protocol(e.to_string()))?;

        let mut request = self
            .agent
            .post(&self.url)
            .header("content-type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send(&body).map_err(|e| match e {
            ureq::Error::Timeout(_) => ChatError::Timeout,
            ureq::Error::StatusCode(code) => ChatError::Status(code),
            other => ChatError::Transport(other.to_string()),
        })?;
        if response.status().as_u16() >= 400 {
            return Err(ChatError::Status(response.status().as_u16()));
        }
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        let parsed: CompletionResponse =
            serde_json::from_str(&text).map_err(|e| ChatError::Protocol(e.to_string()))?;
        parsed
            .choices
            .first()
            .and_then(|c| c.message.content.clone())
            .ok_or_else(|| ChatError::Protocol("no completion choices".to_string()))
    }
}

/// Scripted in-process stand-in for the chat service. Replies are consumed
/// in order; an `Err` entry simulates a transport failure on that turn.
pub struct MockChatClient {
    script: Mutex<std::vec::IntoIter<Result<String, ChatError>>>,
    /// Reply repeated forever once the script runs dry, if set.
    filler: Option<String>,
}

impl MockChatClient {
    pub fn replaying<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let script: Vec<Result<String, ChatError>> =
            replies.into_iter().map(|r| Ok(r.into())).collect();
        MockChatClient {
            script: Mutex::new(script.into_iter()),
            filler: None,
        }
    }

    pub fn scripted(script: Vec<Result<String, ChatError>>) -> Self {
        MockChatClient {
            script: Mutex::new(script.into_iter()),
            filler: None,
        }
    }

    /// A service that never converges: every reply is `filler`.
    pub fn endless(filler: impl Into<String>) -> Self {
        MockChatClient {
            script: Mutex::new(Vec::new().into_iter()),
            filler: Some(filler.into()),
        }
    }

    /// A service that fails immediately.
    pub fn failing() -> Self {
        MockChatClient::scripted(vec![Err(ChatError::Timeout)])
    }
}

impl ChatClient for MockChatClient {
    fn complete(&self, _messages: &[ChatMessage]) -> Result<String, ChatError> {
        let mut script = self.script.lock().expect("mock script lock");
        match script.next() {
            Some(reply) => reply,
            None => match &self.filler {
                Some(f) => Ok(f.clone()),
                None => Err(ChatError::ScriptExhausted),
            },
        }
    }
}
