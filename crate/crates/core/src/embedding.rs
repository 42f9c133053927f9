//! Text embedding behind pluggable providers.
//!
//! Two remote HTTP dialects cover the hosted embedding services, and a
//! deterministic offline hash embedder stands in for them in tests and
//! air-gapped runs. All vectors are L2-normalized at embed time so cosine
//! similarity downstream reduces to a dot product.

use serde::{Deserialize, Serialize};

use crate::error::ErrorClass;

/// Largest number of texts sent in a single remote embedding request.
pub const REMOTE_BATCH_SIZE: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("no texts to embed")]
    NoTexts,
    #[error("cannot normalize an all-zero vector")]
    DegenerateVector,
    #[error("embedder {spec_id} returned {got} dimensions, expected {expected}")]
    DimensionMismatch {
        spec_id: String,
        expected: usize,
        got: usize,
    },
    #[error("embedding endpoint {endpoint} unreachable: {message}")]
    Transport { endpoint: String, message: String },
    #[error("embedding request rejected ({status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("malformed embedding response: {0}")]
    Protocol(String),
    #[error("credential variable {0} is not set")]
    MissingCredential(String),
    #[error("embedder spec invalid: {0}")]
    InvalidSpec(String),
}

impl EmbedError {
    pub fn class(&self) -> ErrorClass {
        match self {
            EmbedError::Transport { .. }
            | EmbedError::Rejected { .. }
            | EmbedError::Protocol(_)
            | EmbedError::DimensionMismatch { .. } => ErrorClass::Provider,
            _ => ErrorClass::Validation,
        }
    }

    /// Transport failures are worth retrying; everything else is not.
    pub fn is_retryable(&self) -> bool {
        matches!(self, EmbedError::Transport { .. })
    }
}

/// Which embedding backend a spec refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    RemoteOpenaiDialect,
    RemoteOllamaDialect,
    OfflineHash,
}

/// Identity and wiring of one embedding backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderSpec {
    pub provider_kind: ProviderKind,
    pub model_id: String,
    pub dimension: usize,
    /// Base URL for the remote kinds; unused by the offline embedder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the bearer credential.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credential_env: Option<String>,
}

impl EmbedderSpec {
    pub fn offline_hash(dimension: usize) -> Self {
        EmbedderSpec {
            provider_kind: ProviderKind::OfflineHash,
            model_id: "trigram-hash".into(),
            dimension,
            endpoint: None,
            credential_env: None,
        }
    }

    /// Stable identity string recorded alongside every vector and store.
    pub fn id(&self) -> String {
        let kind = match self.provider_kind {
            ProviderKind::RemoteOpenaiDialect => "remote_openai_dialect",
            ProviderKind::RemoteOllamaDialect => "remote_ollama_dialect",
            ProviderKind::OfflineHash => "offline_hash",
        };
        format!("{kind}:{}:{}", self.model_id, self.dimension)
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dimension == 0 {
            return Err(EmbedError::InvalidSpec("dimension must be > 0".into()));
        }
        if self.provider_kind != ProviderKind::OfflineHash && self.endpoint.is_none() {
            return Err(EmbedError::InvalidSpec(
                "remote embedder requires an endpoint".into(),
            ));
        }
        Ok(())
    }
}

/// A unit-norm vector tagged with the spec that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub spec_id: String,
}

impl EmbeddingVector {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

/// L2-normalize a raw vector. Fails on the all-zero vector.
pub fn normalize(values: &[f64]) -> Result<Vec<f64>, EmbedError> {
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(EmbedError::DegenerateVector);
    }
    Ok(values.iter().map(|v| v / norm).collect())
}

/// Embedding backend interface. Implementations are immutable after
/// construction, so a single instance may serve concurrent callers.
pub trait Embedder: Send + Sync {
    fn spec(&self) -> &EmbedderSpec;

    /// Embed texts in order, one normalized vector per text.
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut vectors = self.embed_texts(&[text.to_string()])?;
        Ok(vectors.remove(0))
    }
}

/// Build the embedder named by a spec.
pub fn build_embedder(spec: &EmbedderSpec) -> Result<Box<dyn Embedder>, EmbedError> {
    spec.validate()?;
    match spec.provider_kind {
        ProviderKind::OfflineHash => Ok(Box::new(OfflineHashEmbedder::new(spec.clone()))),
        ProviderKind::RemoteOpenaiDialect | ProviderKind::RemoteOllamaDialect => {
            Ok(Box::new(RemoteEmbedder::new(spec.clone())?))
        }
    }
}

// ---------------------------------------------------------------------------
// Offline hash embedder
// ---------------------------------------------------------------------------

/// Deterministic stand-in for remote embedding models: hash character
/// trigrams of the lowercased text into `dimension` buckets, accumulate
/// counts, then L2-normalize. Texts sharing trigrams land near each other,
/// which is enough locality for retrieval tests.
pub struct OfflineHashEmbedder {
    spec: EmbedderSpec,
}

impl OfflineHashEmbedder {
    pub fn new(spec: EmbedderSpec) -> Self {
        OfflineHashEmbedder { spec }
    }

    fn raw_counts(&self, text: &str) -> Vec<f64> {
        let mut counts = vec![0.0f64; self.spec.dimension];
        let lowered = text.to_lowercase();
        let chars: Vec<char> = lowered.chars().collect();
        if chars.len() < 3 {
            // Too short for a trigram: hash the whole text as one gram.
            if !chars.is_empty() {
                let gram: String = chars.iter().collect();
                counts[bucket_of(&gram, self.spec.dimension)] += 1.0;
            }
            return counts;
        }
        let mut gram = String::new();
        for window in chars.windows(3) {
            gram.clear();
            gram.extend(window);
            counts[bucket_of(&gram, self.spec.dimension)] += 1.0;
        }
        counts
    }
}

/// FNV-1a 64-bit, written out so the bucket assignment is identical across
/// processes and releases (the stdlib hasher makes no such promise).
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn bucket_of(gram: &str, dimension: usize) -> usize {
    (fnv1a64(gram.as_bytes()) % dimension as u64) as usize
}

impl Embedder for OfflineHashEmbedder {
    fn spec(&self) -> &EmbedderSpec {
        &self.spec
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.is_empty() {
            return Err(EmbedError::NoTexts);
        }
        let spec_id = self.spec.id();
        texts
            .iter()
            .map(|text| {
                let counts = self.raw_counts(text);
                Ok(EmbeddingVector {
                    values: normalize(&counts)?,
                    spec_id: spec_id.clone(),
                })
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Remote embedders
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct OpenaiEmbedRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct OpenaiEmbedResponse {
    data: Vec<OpenaiEmbedDatum>,
}

#[derive(Deserialize)]
struct OpenaiEmbedDatum {
    embedding: Vec<f64>,
}

#[derive(Serialize)]
struct OllamaEmbedRequest<'a> {
    model: &'a str,
    prompt: &'a str,
}

#[derive(Deserialize)]
struct OllamaEmbedResponse {
    embedding: Vec<f64>,
}

/// HTTP embedding client for the two supported wire dialects.
pub struct RemoteEmbedder {
    spec: EmbedderSpec,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(spec: EmbedderSpec) -> Result<Self, EmbedError> {
        spec.validate()?;
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| EmbedError::InvalidSpec(e.to_string()))?;
        Ok(RemoteEmbedder { spec, client })
    }

    fn endpoint(&self) -> &str {
        self.spec.endpoint.as_deref().unwrap_or_default()
    }

    fn bearer(&self) -> Result<Option<String>, EmbedError> {
        match &self.spec.credential_env {
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| EmbedError::MissingCredential(var.clone())),
            None => Ok(None),
        }
    }

    fn post_json<B: Serialize>(&self, url: &str, body: &B) -> Result<String, EmbedError> {
        let mut req = self.client.post(url).json(body);
        if let Some(token) = self.bearer()? {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| EmbedError::Transport {
            endpoint: self.endpoint().to_string(),
            message: e.to_string(),
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| EmbedError::Transport {
            endpoint: self.endpoint().to_string(),
            message: e.to_string(),
        })?;
        if !status.is_success() {
            return Err(EmbedError::Rejected {
                status: status.as_u16(),
                message: text,
            });
        }
        Ok(text)
    }

    fn check_and_normalize(&self, raw: Vec<f64>) -> Result<EmbeddingVector, EmbedError> {
        if raw.len() != self.spec.dimension {
            return Err(EmbedError::DimensionMismatch {
                spec_id: self.spec.id(),
                expected: self.spec.dimension,
                got: raw.len(),
            });
        }
        Ok(EmbeddingVector {
            values: normalize(&raw)?,
            spec_id: self.spec.id(),
        })
    }

    fn embed_openai_batch(&self, batch: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let url = format!("{}/v1/embeddings", self.endpoint().trim_end_matches('/'));
        let body = OpenaiEmbedRequest {
            model: &self.spec.model_id,
            input: batch,
        };
        let text = self.post_json(&url, &body)?;
        let parsed = parse_openai_embeddings(&text)?;
        if parsed.len() != batch.len() {
            return Err(EmbedError::Protocol(format!(
                "expected {} vectors, got {}",
                batch.len(),
                parsed.len()
            )));
        }
        parsed
            .into_iter()
            .map(|raw| self.check_and_normalize(raw))
            .collect()
    }

    fn embed_ollama_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let url = format!("{}/api/embeddings", self.endpoint().trim_end_matches('/'));
        let body = OllamaEmbedRequest {
            model: &self.spec.model_id,
            prompt: text,
        };
        let resp = self.post_json(&url, &body)?;
        self.check_and_normalize(parse_ollama_embedding(&resp)?)
    }
}

/// Parse the openai-dialect response body: vectors under `data[i].embedding`.
pub fn parse_openai_embeddings(body: &str) -> Result<Vec<Vec<f64>>, EmbedError> {
    let parsed: OpenaiEmbedResponse =
        serde_json::from_str(body).map_err(|e| EmbedError::Protocol(e.to_string()))?;
    Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
}

/// Parse the ollama-dialect response body: a single `embedding` array.
pub fn parse_ollama_embedding(body: &str) -> Result<Vec<f64>, EmbedError> {
    let parsed: OllamaEmbedResponse =
        serde_json::from_str(body).map_err(|e| EmbedError::Protocol(e.to_string()))?;
    Ok(parsed.embedding)
}

impl Embedder for RemoteEmbedder {
    fn spec(&self) -> &EmbedderSpec {
        &self.spec
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.is_empty() {
            return Err(EmbedError::NoTexts);
        }
        let mut out = Vec::with_capacity(texts.len());
        match self.spec.provider_kind {
            ProviderKind::RemoteOpenaiDialect => {
                for batch in texts.chunks(REMOTE_BATCH_SIZE) {
                    out.extend(self.embed_openai_batch(batch)?);
                }
            }
            ProviderKind::RemoteOllamaDialect => {
                for text in texts {
                    out.push(self.embed_ollama_one(text)?);
                }
            }
            ProviderKind::OfflineHash => {
                return Err(EmbedError::InvalidSpec(
                    "offline spec routed to remote embedder".into(),
                ))
            }
        }
        Ok(out)
    }
}

/// Cosine similarity of two equal-length vectors (dot product when both are
/// unit-normalized).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
