//! Flat, persistent vector index with exact top-k retrieval.
//!
//! The store holds a few hundred chunks, so search is an exhaustive scan:
//! every query scores every entry and sorts. Determinism wins over speed at
//! this scale. Ties on score break by ascending chunk id so ranked output is
//! reproducible across runs and platforms.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{dot, EmbeddingVector};
use crate::error::ErrorClass;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("entry {chunk_id} has dimension {got}, store dimension is {expected}")]
    DimensionMismatch {
        chunk_id: String,
        expected: usize,
        got: usize,
    },
    #[error("query has dimension {got}, store dimension is {expected}")]
    QueryDimensionMismatch { expected: usize, got: usize },
    #[error("cannot search an empty store")]
    EmptyStore,
    #[error("store file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("store file {path} malformed at line {line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
}

impl StoreError {
    pub fn class(&self) -> ErrorClass {
        match self {
            StoreError::Io { .. } => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }
}

/// One indexed chunk: its id, unit-norm vector, and the chunk text payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredEntry {
    pub chunk_id: String,
    pub vector: EmbeddingVector,
    pub payload: String,
}

/// One search hit. Scores are dot products of unit vectors, so they live in
/// [-1, 1]; ranks are consecutive from 1 in descending score order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub chunk_id: String,
    pub score: f64,
    pub rank: usize,
    pub payload: String,
}

#[derive(Serialize, Deserialize)]
struct StoreHeader {
    dimension: usize,
    count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedder: Option<String>,
}

/// Exact-search flat vector index.
///
/// The first inserted entry fixes the store dimension. Entries are keyed by
/// chunk id; re-upserting an id replaces the previous entry. The store is
/// immutable during the query phase by contract, so `top_k` takes `&self`
/// and may be called concurrently.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorStore {
    dimension: Option<usize>,
    embedder_id: Option<String>,
    entries: BTreeMap<String, StoredEntry>,
}

impl VectorStore {
    pub fn new() -> Self {
        VectorStore::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    /// Identity of the embedder that produced the stored vectors, when known.
    pub fn embedder_id(&self) -> Option<&str> {
        self.embedder_id.as_deref()
    }

    pub fn set_embedder_id(&mut self, id: impl Into<String>) {
        self.embedder_id = Some(id.into());
    }

    /// Insert or replace entries. The first insert fixes the dimension.
    pub fn upsert(&mut self, entries: Vec<StoredEntry>) -> Result<(), StoreError> {
        for entry in entries {
            let dim = entry.vector.dimension();
            match self.dimension {
                None => self.dimension = Some(dim),
                Some(expected) if expected != dim => {
                    return Err(StoreError::DimensionMismatch {
                        chunk_id: entry.chunk_id,
                        expected,
                        got: dim,
                    });
                }
                Some(_) => {}
            }
            self.entries.insert(entry.chunk_id.clone(), entry);
        }
        Ok(())
    }

    /// Exact top-k by cosine similarity. Returns `min(k, len)` results sorted
    /// by score descending, ties broken by ascending chunk id.
    pub fn top_k(
        &self,
        query: &EmbeddingVector,
        k: usize,
    ) -> Result<Vec<RetrievalResult>, StoreError> {
        if self.entries.is_empty() {
            return Err(StoreError::EmptyStore);
        }
        let dimension = self.dimension.expect("non-empty store has a dimension");
        if query.dimension() != dimension {
            return Err(StoreError::QueryDimensionMismatch {
                expected: dimension,
                got: query.dimension(),
            });
        }
        // BTreeMap iteration is already ascending by chunk_id, so a stable
        // sort on score alone preserves the id tie-break.
        let mut scored: Vec<(&StoredEntry, f64)> = self
            .entries
            .values()
            .map(|entry| (entry, dot(&entry.vector.values, &query.values)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(scored
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (entry, score))| RetrievalResult {
                chunk_id: entry.chunk_id.clone(),
                score,
                rank: i + 1,
                payload: entry.payload.clone(),
            })
            .collect())
    }

    /// Persist as JSON-lines: a header line (dimension, count) followed by
    /// one entry per line in ascending chunk-id order.
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), StoreError> {
        let path = path.as_ref();
        let header = StoreHeader {
            dimension: self.dimension.unwrap_or(0),
            count: self.entries.len(),
            embedder: self.embedder_id.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serialization cannot fail");
        out.push('\n');
        for entry in self.entries.values() {
            out.push_str(&serde_json::to_string(entry).expect("entry serialization cannot fail"));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|source| StoreError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Load a store written by [`save`](Self::save).
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|source| StoreError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let format_err = |line: usize, message: String| StoreError::Format {
            path: path.display().to_string(),
            line,
            message,
        };
        let mut lines = raw.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| format_err(1, "missing header line".into()))?;
        let header: StoreHeader =
            serde_json::from_str(header_line).map_err(|e| format_err(1, e.to_string()))?;

        let mut store = VectorStore::new();
        store.embedder_id = header.embedder;
        if header.count > 0 {
            store.dimension = Some(header.dimension);
        }
        let mut seen = 0usize;
        for (idx, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: StoredEntry =
                serde_json::from_str(line).map_err(|e| format_err(idx + 2, e.to_string()))?;
            if entry.vector.dimension() != header.dimension {
                return Err(format_err(
                    idx + 2,
                    format!(
                        "entry dimension {} does not match header dimension {}",
                        entry.vector.dimension(),
                        header.dimension
                    ),
                ));
            }
            store.entries.insert(entry.chunk_id.clone(), entry);
            seen += 1;
        }
        if seen != header.count {
            return Err(format_err(
                seen + 2,
                format!("header promises {} entries, found {}", header.count, seen),
            ));
        }
        Ok(store)
    }
}
