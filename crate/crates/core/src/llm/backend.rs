//! Text-completion backends: a chat-completions HTTP client and a scripted
//! mock used for tests and offline runs.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptRole {
    GraphExtract,
    GenQuestion,
    RefineQuestion,
    EntityQa,
    SubclaimVerify,
    SubclaimGen,
}

impl fmt::Display for PromptRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PromptRole::GraphExtract => "graph_extract",
            PromptRole::GenQuestion => "gen_question",
            PromptRole::RefineQuestion => "refine_question",
            PromptRole::EntityQa => "entity_qa",
            PromptRole::SubclaimVerify => "subclaim_verify",
            PromptRole::SubclaimGen => "subclaim_gen",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BackendRequest {
    pub role: PromptRole,
    pub prompt: String,
    pub max_output_tokens: u32,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("no mock rule matches {role} request")]
    Unmatched { role: PromptRole },
    #[error("transport: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Decode(String),
    #[error("mock script {path}: {message}")]
    Script { path: String, message: String },
}

pub trait Backend: Send + Sync {
    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError>;
}

/// One scripted response. `role: None` matches any role; `match` is a
/// substring of the rendered prompt (empty matches everything).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    #[serde(default)]
    pub role: Option<PromptRole>,
    #[serde(rename = "match", default)]
    pub key: String,
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    /// Returned when no rule matches; `None` makes unmatched requests an error.
    #[serde(default)]
    pub default: Option<String>,
    #[serde(default)]
    pub rules: Vec<MockRule>,
}

/// Stateless scripted backend. The longest matching key wins; ties go to the
/// rule listed first.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    script: MockScript,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend { script }
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let err = |message: String| BackendError::Script {
            path: path.display().to_string(),
            message,
        };
        let raw = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let script = serde_json::from_str(&raw).map_err(|e| err(e.to_string()))?;
        Ok(Self::new(script))
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }
}

impl Backend for MockBackend {
    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        let mut best: Option<&MockRule> = None;
        for rule in &self.script.rules {
            if rule.role.is_some_and(|r| r != request.role) || !request.prompt.contains(&rule.key) {
                continue;
            }
            if best.is_none_or(|b| rule.key.len() > b.key.len()) {
                best = Some(rule);
            }
        }
        match (best, &self.script.default) {
            (Some(rule), _) => Ok(rule.response.clone()),
            (None, Some(d)) => Ok(d.clone()),
            (None, None) => Err(BackendError::Unmatched { role: request.role }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    /// Full chat-completions endpoint, e.g. `http://host:8000/v1/chat/completions`.
    pub url: String,
    pub model: String,
    pub timeout: Duration,
    pub temperature: f64,
    pub api_key: Option<String>,
}

/// OpenAI-compatible chat-completions client (messages in, text out).
pub struct HttpBackend {
    config: HttpBackendConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(HttpBackend { config, client })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

impl Backend for HttpBackend {
    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": self.config.temperature,
            "max_tokens": request.max_output_tokens,
            "stream": false,
        });
        let mut req = self.client.post(&self.config.url).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Status {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            });
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| BackendError::Decode(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Decode("no choices[0].message.content".into()))
    }
}
