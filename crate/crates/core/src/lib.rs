//! Retrieval-augmented evaluation harness for UAV engineering mathematics.
//!
//! The crate wires together six concerns:
//!
//! - [`corpus`]: ingest LaTeX documents and cut them into page-level chunks;
//! - [`embedding`]: turn text into unit vectors via remote services or a
//!   deterministic offline hash embedder;
//! - [`vectorstore`]: a flat, persistent index with exact top-k search;
//! - [`llm_client`]: chat clients for two HTTP dialects plus record/replay;
//! - [`pipeline`]: the staged query flow (embed, retrieve, prompt, ask) and
//!   the benchmark runner;
//! - [`bench`], [`oracle`], [`evaluator`]: the question-set data model, a
//!   deterministic formula registry that recomputes ground truths, and the
//!   scoring stack (extraction, formulation judging, metrics).
//!
//! Everything is deterministic by construction except calls into remote
//! providers, and those can be captured in a transcript and replayed.

pub mod bench;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod evaluator;
pub mod llm_client;
pub mod oracle;
pub mod pipeline;
pub mod vectorstore;

pub use bench::{BenchQuestion, BenchSet, Level, ToleranceKind, ToleranceSpec};
pub use corpus::{DocumentChunk, SourceDocument};
pub use embedding::{Embedder, EmbedderSpec, EmbeddingVector, ProviderKind};
pub use error::ErrorClass;
pub use evaluator::{FormulationVerdict, Overrides, RunRecord, ScoreReport};
pub use llm_client::{ChatClient, ChatDialect, ChatRequest, ChatResponse};
pub use pipeline::{ChatSettings, Mode, Pipeline, PipelineAnswer, RunEntry};
pub use vectorstore::{RetrievalResult, StoredEntry, VectorStore};
