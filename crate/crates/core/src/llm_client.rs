//! Chat-completion clients: two remote HTTP dialects plus a scripted replay
//! client keyed by request digest.
//!
//! Every request has a digest that is a pure function of its content, which
//! is what makes record/replay byte-faithful: a recording wrapper appends
//! `(digest, response)` pairs to a JSON-lines transcript, and the replay
//! client serves them back without touching the network.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ErrorClass;

/// Retry budget for transport failures. HTTP 4xx is never retried.
pub const MAX_RETRIES: u32 = 3;
const RETRY_BASE_DELAY: Duration = Duration::from_millis(100);

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("chat request must contain at least one user message")]
    NoUserMessage,
    #[error("chat message content must be non-empty")]
    EmptyMessage,
    #[error("endpoint {endpoint} unreachable after {attempts} attempts: {message}")]
    Transport {
        endpoint: String,
        attempts: u32,
        message: String,
    },
    #[error("provider rejected request ({status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("malformed provider response: {0}")]
    Protocol(String),
    #[error("credential variable {0} is not set")]
    MissingCredential(String),
    #[error("no transcript entry for request digest {0}")]
    MissingTranscript(String),
    #[error("transcript file {path}: {source}")]
    TranscriptIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("transcript file {path} malformed at line {line}: {message}")]
    TranscriptFormat {
        path: String,
        line: usize,
        message: String,
    },
}

impl ClientError {
    pub fn class(&self) -> ErrorClass {
        match self {
            ClientError::TranscriptIo { .. } => ErrorClass::Io,
            ClientError::NoUserMessage
            | ClientError::EmptyMessage
            | ClientError::TranscriptFormat { .. } => ErrorClass::Validation,
            _ => ErrorClass::Provider,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), ClientError> {
        if !self.messages.iter().any(|m| m.role == Role::User) {
            return Err(ClientError::NoUserMessage);
        }
        if self.messages.iter().any(|m| m.content.is_empty()) {
            return Err(ClientError::EmptyMessage);
        }
        Ok(())
    }

    /// Content digest: sha-256 over the canonical JSON serialization of
    /// (model_id, messages, temperature, max_tokens). Identical requests
    /// always map to identical digests, across processes.
    pub fn digest(&self) -> String {
        let canonical =
            serde_json::to_string(self).expect("chat request serialization cannot fail");
        let hash = Sha256::digest(canonical.as_bytes());
        let mut out = String::with_capacity(64);
        for byte in hash {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub model_id: String,
    pub latency_ms: u64,
    pub finish_reason: String,
}

/// Chat backend interface; implementations must be safe for concurrent use.
pub trait ChatClient: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError>;
}

// ---------------------------------------------------------------------------
// Remote HTTP client
// ---------------------------------------------------------------------------

/// Wire dialect spoken by a remote chat endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatDialect {
    Openai,
    Ollama,
}

#[derive(Serialize)]
struct OpenaiChatBody<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
    stream: bool,
}

#[derive(Deserialize)]
struct OpenaiChatResponse {
    choices: Vec<OpenaiChoice>,
}

#[derive(Deserialize)]
struct OpenaiChoice {
    message: OpenaiChoiceMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct OpenaiChoiceMessage {
    content: String,
}

#[derive(Serialize)]
struct OllamaChatBody<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    stream: bool,
    options: OllamaOptions,
}

#[derive(Serialize)]
struct OllamaOptions {
    temperature: f64,
    num_predict: u32,
}

#[derive(Deserialize)]
struct OllamaChatResponse {
    message: OllamaMessage,
    #[serde(default)]
    done_reason: Option<String>,
}

#[derive(Deserialize)]
struct OllamaMessage {
    content: String,
}

/// Parse an openai-dialect completion body: text under
/// `choices[0].message.content`.
pub fn parse_openai_chat(body: &str) -> Result<(String, String), ClientError> {
    let parsed: OpenaiChatResponse =
        serde_json::from_str(body).map_err(|e| ClientError::Protocol(e.to_string()))?;
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| ClientError::Protocol("response has no choices".into()))?;
    Ok((
        choice.message.content,
        choice.finish_reason.unwrap_or_else(|| "stop".into()),
    ))
}

/// Parse an ollama-dialect completion body: text under `message.content`.
pub fn parse_ollama_chat(body: &str) -> Result<(String, String), ClientError> {
    let parsed: OllamaChatResponse =
        serde_json::from_str(body).map_err(|e| ClientError::Protocol(e.to_string()))?;
    Ok((
        parsed.message.content,
        parsed.done_reason.unwrap_or_else(|| "stop".into()),
    ))
}

/// Blocking HTTP chat client. Transport failures are retried with
/// exponential backoff; HTTP 4xx/5xx responses are surfaced immediately.
pub struct HttpChatClient {
    dialect: ChatDialect,
    endpoint: String,
    credential_env: Option<String>,
    client: reqwest::blocking::Client,
    max_retries: u32,
}

impl HttpChatClient {
    pub fn new(
        dialect: ChatDialect,
        endpoint: impl Into<String>,
        credential_env: Option<String>,
    ) -> Self {
        HttpChatClient {
            dialect,
            endpoint: endpoint.into(),
            credential_env,
            client: reqwest::blocking::Client::new(),
            max_retries: MAX_RETRIES,
        }
    }

    pub fn with_max_retries(mut self, max_retries: u32) -> Self {
        self.max_retries = max_retries;
        self
    }

    fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        match self.dialect {
            ChatDialect::Openai => format!("{base}/v1/chat/completions"),
            ChatDialect::Ollama => format!("{base}/api/chat"),
        }
    }

    fn body_json(&self, request: &ChatRequest) -> String {
        match self.dialect {
            ChatDialect::Openai => serde_json::to_string(&OpenaiChatBody {
                model: &request.model_id,
                messages: &request.messages,
                temperature: request.temperature,
                max_tokens: request.max_tokens,
                stream: false,
            }),
            ChatDialect::Ollama => serde_json::to_string(&OllamaChatBody {
                model: &request.model_id,
                messages: &request.messages,
                stream: false,
                options: OllamaOptions {
                    temperature: request.temperature,
                    num_predict: request.max_tokens,
                },
            }),
        }
        .expect("chat body serialization cannot fail")
    }

    fn send_once(&self, request: &ChatRequest) -> Result<(String, String), ClientError> {
        let mut req = self
            .client
            .post(self.url())
            .header("content-type", "application/json")
            .body(self.body_json(request));
        if let Some(var) = &self.credential_env {
            let token =
                std::env::var(var).map_err(|_| ClientError::MissingCredential(var.clone()))?;
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| ClientError::Transport {
            endpoint: self.endpoint.clone(),
            attempts: 1,
            message: e.to_string(),
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ClientError::Transport {
            endpoint: self.endpoint.clone(),
            attempts: 1,
            message: e.to_string(),
        })?;
        if !status.is_success() {
            return Err(ClientError::Rejected {
                status: status.as_u16(),
                message: text,
            });
        }
        match self.dialect {
            ChatDialect::Openai => parse_openai_chat(&text),
            ChatDialect::Ollama => parse_ollama_chat(&text),
        }
    }
}

impl ChatClient for HttpChatClient {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
        request.validate()?;
        let start = Instant::now();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            match self.send_once(request) {
                Ok((text, finish_reason)) => {
                    return Ok(ChatResponse {
                        text,
                        model_id: request.model_id.clone(),
                        latency_ms: start.elapsed().as_millis() as u64,
                        finish_reason,
                    });
                }
                Err(ClientError::Transport { message, .. }) => {
                    if attempt > self.max_retries {
                        return Err(ClientError::Transport {
                            endpoint: self.endpoint.clone(),
                            attempts: attempt,
                            message,
                        });
                    }
                    std::thread::sleep(RETRY_BASE_DELAY * 2u32.saturating_pow(attempt - 1));
                }
                Err(other) => return Err(other),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Transcript: record and replay
// ---------------------------------------------------------------------------

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub digest: String,
    pub request: ChatRequest,
    pub response_text: String,
    pub latency_ms: u64,
}

/// Read every transcript line from a JSON-lines file.
pub fn load_transcript<P: AsRef<Path>>(path: P) -> Result<Vec<TranscriptEntry>, ClientError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|source| ClientError::TranscriptIo {
        path: path.display().to_string(),
        source,
    })?;
    let mut entries = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: TranscriptEntry =
            serde_json::from_str(line).map_err(|e| ClientError::TranscriptFormat {
                path: path.display().to_string(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Deterministic client that answers from a recorded transcript. A request
/// whose digest is absent from the transcript is an error naming the digest.
pub struct ReplayClient {
    responses: HashMap<String, TranscriptEntry>,
}

impl ReplayClient {
    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self, ClientError> {
        Ok(Self::from_entries(load_transcript(path)?))
    }

    pub fn from_entries(entries: Vec<TranscriptEntry>) -> Self {
        let responses = entries
            .into_iter()
            .map(|entry| (entry.digest.clone(), entry))
            .collect();
        ReplayClient { responses }
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatClient for ReplayClient {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
        request.validate()?;
        let digest = request.digest();
        let entry = self
            .responses
            .get(&digest)
            .ok_or(ClientError::MissingTranscript(digest))?;
        Ok(ChatResponse {
            text: entry.response_text.clone(),
            model_id: request.model_id.clone(),
            latency_ms: entry.latency_ms,
            finish_reason: "replay".into(),
        })
    }
}

/// Wrapper that appends every (digest, response) pair to a transcript file
/// while delegating to the inner client unchanged.
pub struct RecordingClient<C> {
    inner: C,
    path: PathBuf,
    writer: Mutex<std::fs::File>,
}

impl<C: ChatClient> RecordingClient<C> {
    pub fn new<P: AsRef<Path>>(inner: C, path: P) -> Result<Self, ClientError> {
        let path = path.as_ref().to_path_buf();
        let writer = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| ClientError::TranscriptIo {
                path: path.display().to_string(),
                source,
            })?;
        Ok(RecordingClient {
            inner,
            path,
            writer: Mutex::new(writer),
        })
    }
}

impl<C: ChatClient> ChatClient for RecordingClient<C> {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
        let response = self.inner.chat(request)?;
        let entry = TranscriptEntry {
            digest: request.digest(),
            request: request.clone(),
            response_text: response.text.clone(),
            latency_ms: response.latency_ms,
        };
        let line = serde_json::to_string(&entry).expect("transcript serialization cannot fail");
        let mut writer = self.writer.lock().expect("transcript writer poisoned");
        writeln!(writer, "{line}").map_err(|source| ClientError::TranscriptIo {
            path: self.path.display().to_string(),
            source,
        })?;
        Ok(response)
    }
}
