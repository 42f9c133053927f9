//! Corpus ingestion: load LaTeX-converted source documents and segment them
//! into page-level chunks with stable identities.
//!
//! Documents are treated as opaque text; the page boundary is a literal
//! delimiter line injected during preprocessing (default `%%PAGE%%`).
//! Chunking is a pure partition: joining the chunk texts with the delimiter
//! line restores the document body byte-exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ErrorClass;

/// Default page-boundary marker expected in preprocessed LaTeX files.
pub const DEFAULT_PAGE_DELIMITER: &str = "%%PAGE%%";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus file {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus file {path} is empty or whitespace-only")]
    EmptyDocument { path: String },
    #[error("cannot write chunk file {path}: {source}")]
    WriteFailed {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed chunk file {path} at line {line}: {message}")]
    MalformedChunkFile {
        path: String,
        line: usize,
        message: String,
    },
}

impl CorpusError {
    pub fn class(&self) -> ErrorClass {
        match self {
            CorpusError::Unreadable { .. } | CorpusError::WriteFailed { .. } => ErrorClass::Io,
            CorpusError::EmptyDocument { .. } | CorpusError::MalformedChunkFile { .. } => {
                ErrorClass::Validation
            }
        }
    }
}

/// One LaTeX-converted source document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub doc_id: String,
    pub title: String,
    pub body: String,
}

/// One page-level segment of a source document; the unit of retrieval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentChunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub page_index: usize,
    pub text: String,
    pub char_count: usize,
}

impl DocumentChunk {
    fn new(doc_id: &str, page_index: usize, text: String) -> Self {
        DocumentChunk {
            chunk_id: chunk_id(doc_id, page_index),
            doc_id: doc_id.to_string(),
            page_index,
            char_count: text.chars().count(),
            text,
        }
    }
}

/// Stable chunk identity: a pure function of document id and page index.
pub fn chunk_id(doc_id: &str, page_index: usize) -> String {
    format!("{doc_id}#p{page_index}")
}

/// Load one UTF-8 LaTeX document per path. The document id is the file stem,
/// so re-ingestion of the same files yields identical ids.
pub fn load_documents<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<SourceDocument>, CorpusError> {
    let mut docs = Vec::with_capacity(paths.len());
    for path in paths {
        let path = path.as_ref();
        let body = std::fs::read_to_string(path).map_err(|source| CorpusError::Unreadable {
            path: path.display().to_string(),
            source,
        })?;
        if body.trim().is_empty() {
            return Err(CorpusError::EmptyDocument {
                path: path.display().to_string(),
            });
        }
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        docs.push(SourceDocument {
            doc_id: stem.clone(),
            title: stem,
            body,
        });
    }
    Ok(docs)
}

/// Split a document into page chunks at each line equal to `delimiter`.
///
/// The partition is loss-free: `chunks.join("\n{delimiter}\n") == body`, and
/// the chunk count is always the delimiter-line count plus one. A document
/// without any delimiter line yields a single chunk.
pub fn chunk_by_page(doc: &SourceDocument, delimiter: &str) -> Vec<DocumentChunk> {
    let mut chunks = Vec::new();
    let mut current = String::new();
    let mut first_line_in_segment = true;
    let mut page_index = 0usize;

    // split('\n') keeps empty trailing segments, so rejoining with '\n'
    // reproduces the body byte-exactly even without a final newline.
    for line in doc.body.split('\n') {
        if line == delimiter {
            chunks.push(DocumentChunk::new(&doc.doc_id, page_index, current));
            current = String::new();
            first_line_in_segment = true;
            page_index += 1;
        } else {
            if !first_line_in_segment {
                current.push('\n');
            }
            current.push_str(line);
            first_line_in_segment = false;
        }
    }
    chunks.push(DocumentChunk::new(&doc.doc_id, page_index, current));
    chunks
}

/// Per-document chunk counts plus the corpus total.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub per_document: BTreeMap<String, usize>,
    pub total: usize,
}

pub fn corpus_stats(chunks: &[DocumentChunk]) -> CorpusStats {
    let mut per_document = BTreeMap::new();
    for chunk in chunks {
        *per_document.entry(chunk.doc_id.clone()).or_insert(0) += 1;
    }
    CorpusStats {
        per_document,
        total: chunks.len(),
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (doc_id, count) in &self.per_document {
            writeln!(f, "{doc_id}: {count} chunks")?;
        }
        write!(f, "total: {} chunks", self.total)
    }
}

/// Wire form of a chunk in the persisted JSON-lines chunk file.
#[derive(Debug, Serialize, Deserialize)]
struct ChunkLine<'a> {
    chunk_id: &'a str,
    doc_id: &'a str,
    page_index: usize,
    text: &'a str,
}

#[derive(Debug, Deserialize)]
struct OwnedChunkLine {
    chunk_id: String,
    doc_id: String,
    page_index: usize,
    text: String,
}

/// Persist chunks as JSON-lines, one object per chunk.
pub fn save_chunks<P: AsRef<Path>>(chunks: &[DocumentChunk], path: P) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut out = String::new();
    for chunk in chunks {
        let line = ChunkLine {
            chunk_id: &chunk.chunk_id,
            doc_id: &chunk.doc_id,
            page_index: chunk.page_index,
            text: &chunk.text,
        };
        out.push_str(&serde_json::to_string(&line).expect("chunk serialization cannot fail"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| CorpusError::WriteFailed {
        path: path.display().to_string(),
        source,
    })
}

/// Load chunks written by [`save_chunks`].
pub fn load_chunks<P: AsRef<Path>>(path: P) -> Result<Vec<DocumentChunk>, CorpusError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|source| CorpusError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    let mut chunks = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: OwnedChunkLine =
            serde_json::from_str(line).map_err(|e| CorpusError::MalformedChunkFile {
                path: path.display().to_string(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        chunks.push(DocumentChunk {
            chunk_id: parsed.chunk_id,
            doc_id: parsed.doc_id,
            page_index: parsed.page_index,
            char_count: parsed.text.chars().count(),
            text: parsed.text,
        });
    }
    Ok(chunks)
}
