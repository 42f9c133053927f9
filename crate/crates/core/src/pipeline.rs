//! Six-stage retrieval pipeline for a single question, plus the benchmark
//! runner: take a query, embed it, search the store, assemble the prompt,
//! call the model, and capture everything needed to score the run later.
//!
//! The no-retrieval baseline reuses the same prompt template with an empty
//! context block, so prompt phrasing stays constant across the ablation and
//! retrieval is the only variable.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::bench::{BenchQuestion, BenchSet};
use crate::embedding::Embedder;
use crate::error::ErrorClass;
use crate::llm_client::{ChatClient, ChatMessage, ChatRequest};
use crate::vectorstore::{RetrievalResult, VectorStore};

/// Default number of chunks retrieved per query. The source material never
/// fixes this; it is a harness choice recorded in every run config.
pub const DEFAULT_TOP_K: usize = 4;

/// Default cap on concurrently executing questions.
pub const DEFAULT_IN_FLIGHT: usize = 4;

/// First header line of the prompt template.
pub const PROMPT_HEADER_1: &str = "To answer the questions, use only the documents provided.";

/// Second header line of the prompt template.
pub const PROMPT_HEADER_2: &str = "Formulations are provided for all the questions in the provided documents; however, to calculate the result, you may use your calculation skills.";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("question {question_id}: {source}")]
    Embed {
        question_id: String,
        #[source]
        source: crate::embedding::EmbedError,
    },
    #[error("question {question_id}: {source}")]
    Store {
        question_id: String,
        #[source]
        source: crate::vectorstore::StoreError,
    },
    #[error("question {question_id}: {source}")]
    Chat {
        question_id: String,
        #[source]
        source: crate::llm_client::ClientError,
    },
    #[error("rag mode requires a non-empty store")]
    StoreRequired,
}

impl PipelineError {
    pub fn class(&self) -> ErrorClass {
        match self {
            PipelineError::Embed { source, .. } => source.class(),
            PipelineError::Store { source, .. } => source.class(),
            PipelineError::Chat { source, .. } => source.class(),
            PipelineError::StoreRequired => ErrorClass::Validation,
        }
    }
}

/// Whether retrieval feeds the prompt or the question stands alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Rag,
    NoRag,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Rag => "rag",
            Mode::NoRag => "no_rag",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything captured about one question's trip through the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineAnswer {
    pub question_id: String,
    pub mode: Mode,
    pub retrieved: Vec<RetrievalResult>,
    pub prompt_text: String,
    pub response_text: String,
    pub latency_ms: u64,
}

/// One line of a run file: either an answer or a per-question failure that
/// left the rest of the run alive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunEntry {
    Answer(PipelineAnswer),
    Error { question_id: String, error: String },
}

impl RunEntry {
    pub fn question_id(&self) -> &str {
        match self {
            RunEntry::Answer(a) => &a.question_id,
            RunEntry::Error { question_id, .. } => question_id,
        }
    }
}

/// Instantiate the prompt template: two header lines, a blank line, the
/// contexts joined by blank lines, a blank line, then the question.
/// Byte-exact by contract; retrieval rank order is preserved.
pub fn build_prompt(contexts: &[String], question: &str) -> String {
    format!(
        "{PROMPT_HEADER_1}\n{PROMPT_HEADER_2}\n\n{}\n\nQuestion: {question}",
        contexts.join("\n\n")
    )
}

/// Chat settings applied to every question in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatSettings {
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatSettings {
    pub fn deterministic(model_id: impl Into<String>) -> Self {
        ChatSettings {
            model_id: model_id.into(),
            temperature: 0.0,
            max_tokens: 2048,
        }
    }
}

/// The assembled pipeline: shared, read-only state for a run.
pub struct Pipeline<'a> {
    pub embedder: &'a dyn Embedder,
    pub store: &'a VectorStore,
    pub client: &'a dyn ChatClient,
    pub settings: ChatSettings,
    pub in_flight: usize,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        embedder: &'a dyn Embedder,
        store: &'a VectorStore,
        client: &'a dyn ChatClient,
        settings: ChatSettings,
    ) -> Self {
        Pipeline {
            embedder,
            store,
            client,
            settings,
            in_flight: DEFAULT_IN_FLIGHT,
        }
    }

    pub fn with_in_flight(mut self, in_flight: usize) -> Self {
        self.in_flight = in_flight.max(1);
        self
    }

    /// Run the staged pipeline for one question: embed the query, retrieve
    /// top-k, assemble the prompt, query the model, and capture the result.
    /// In no-rag mode the retrieval stages are skipped and the context block
    /// is empty.
    pub fn answer_question(
        &self,
        question: &BenchQuestion,
        mode: Mode,
        k: usize,
    ) -> Result<PipelineAnswer, PipelineError> {
        let qid = &question.id;
        let retrieved = match mode {
            Mode::NoRag => Vec::new(),
            Mode::Rag => {
                if self.store.is_empty() {
                    return Err(PipelineError::StoreRequired);
                }
                let query = self
                    .embedder
                    .embed_one(&question.prompt_text)
                    .map_err(|source| PipelineError::Embed {
                        question_id: qid.clone(),
                        source,
                    })?;
                self.store
                    .top_k(&query, k)
                    .map_err(|source| PipelineError::Store {
                        question_id: qid.clone(),
                        source,
                    })?
            }
        };

        let contexts: Vec<String> = retrieved.iter().map(|r| r.payload.clone()).collect();
        let prompt_text = build_prompt(&contexts, &question.prompt_text);
        let request = ChatRequest {
            model_id: self.settings.model_id.clone(),
            messages: vec![ChatMessage::user(prompt_text.clone())],
            temperature: self.settings.temperature,
            max_tokens: self.settings.max_tokens,
        };
        let response = self
            .client
            .chat(&request)
            .map_err(|source| PipelineError::Chat {
                question_id: qid.clone(),
                source,
            })?;

        Ok(PipelineAnswer {
            question_id: qid.clone(),
            mode,
            retrieved,
            prompt_text,
            response_text: response.text,
            latency_ms: response.latency_ms,
        })
    }

    /// Run every bench question. Output order always matches bench order,
    /// whatever the concurrency level; a per-question failure becomes an
    /// error entry in its slot and the run continues.
    pub fn run_benchmark(&self, bench: &BenchSet, mode: Mode, k: usize) -> Vec<RunEntry> {
        let n = bench.len();
        if n == 0 {
            return Vec::new();
        }
        let workers = self.in_flight.min(n);
        let queue: Mutex<VecDeque<usize>> = Mutex::new((0..n).collect());
        let slots: Mutex<Vec<Option<RunEntry>>> = Mutex::new(vec![None; n]);

        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let next = queue.lock().expect("queue poisoned").pop_front();
                    let Some(idx) = next else { break };
                    let question = &bench.questions[idx];
                    let entry = match self.answer_question(question, mode, k) {
                        Ok(answer) => RunEntry::Answer(answer),
                        Err(e) => RunEntry::Error {
                            question_id: question.id.clone(),
                            error: e.to_string(),
                        },
                    };
                    slots.lock().expect("slots poisoned")[idx] = Some(entry);
                });
            }
        });

        slots
            .into_inner()
            .expect("slots poisoned")
            .into_iter()
            .map(|slot| slot.expect("every slot filled"))
            .collect()
    }
}

/// Write run entries as JSON-lines.
pub fn save_run<P: AsRef<Path>>(entries: &[RunEntry], path: P) -> Result<(), std::io::Error> {
    let mut out = String::new();
    for entry in entries {
        out.push_str(&serde_json::to_string(entry).expect("run entry serialization cannot fail"));
        out.push('\n');
    }
    std::fs::write(path, out)
}

/// Load run entries written by [`save_run`].
pub fn load_run<P: AsRef<Path>>(path: P) -> Result<Vec<RunEntry>, std::io::Error> {
    let raw = std::fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: RunEntry = serde_json::from_str(line).map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("run file line {}: {e}", idx + 1),
            )
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{default_tolerance, Level};
    use crate::embedding::{build_embedder, EmbedderSpec};
    use crate::llm_client::{ChatClient, ChatResponse, ClientError};
    use crate::oracle::ParamMap;
    use crate::vectorstore::StoredEntry;

    fn question(id: &str, prompt: &str) -> BenchQuestion {
        BenchQuestion {
            id: id.into(),
            level: Level::Basic,
            prompt_text: prompt.into(),
            parameters: ParamMap::new(),
            ground_truth: 1.0,
            gt_unit: String::new(),
            tolerance: default_tolerance(),
            num_variables: 1,
            num_nested_equations: 1,
            formula_id: String::new(),
            formula_keywords: vec!["kw".into()],
        }
    }

    struct EchoClient;

    impl ChatClient for EchoClient {
        fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
            request.validate()?;
            Ok(ChatResponse {
                text: format!("answered: {}", request.messages[0].content.len()),
                model_id: request.model_id.clone(),
                latency_ms: 0,
                finish_reason: "stop".into(),
            })
        }
    }

    /// Fails on one specific question id.
    struct FaultyClient {
        poison: String,
    }

    impl ChatClient for FaultyClient {
        fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
            if request.messages[0].content.contains(&self.poison) {
                return Err(ClientError::Rejected {
                    status: 400,
                    message: "injected fault".into(),
                });
            }
            EchoClient.chat(request)
        }
    }

    #[test]
    fn prompt_template_is_byte_exact() {
        let got = build_prompt(&["C1".to_string()], "Q");
        let want = "To answer the questions, use only the documents provided.\n\
                    Formulations are provided for all the questions in the provided documents; \
                    however, to calculate the result, you may use your calculation skills.\n\
                    \n\
                    C1\n\
                    \n\
                    Question: Q";
        assert_eq!(got, want);
    }

    #[test]
    fn empty_context_block_degenerates_cleanly() {
        let got = build_prompt(&[], "Q");
        assert!(got.starts_with(PROMPT_HEADER_1));
        assert!(got.contains("\n\n\n\nQuestion: Q"));
    }

    #[test]
    fn contexts_appear_in_rank_order() {
        let got = build_prompt(&["first".to_string(), "second".to_string()], "Q");
        let first = got.find("first").unwrap();
        let second = got.find("second").unwrap();
        assert!(first < second);
        assert!(got.contains("first\n\nsecond"));
    }

    fn seeded_pipeline_parts() -> (Box<dyn crate::embedding::Embedder>, VectorStore) {
        let embedder = build_embedder(&EmbedderSpec::offline_hash(128)).unwrap();
        let mut store = VectorStore::new();
        let chunks = [
            (
                "c0",
                "blade power in forward flight depends on rotor tip speed",
            ),
            ("c1", "shannon capacity of a channel grows with bandwidth"),
            ("c2", "the lift equation relates wing area and air density"),
        ];
        let texts: Vec<String> = chunks.iter().map(|(_, t)| t.to_string()).collect();
        let vectors = embedder.embed_texts(&texts).unwrap();
        store
            .upsert(
                chunks
                    .iter()
                    .zip(vectors)
                    .map(|((id, text), vector)| StoredEntry {
                        chunk_id: id.to_string(),
                        vector,
                        payload: text.to_string(),
                    })
                    .collect(),
            )
            .unwrap();
        (embedder, store)
    }

    #[test]
    fn rag_mode_retrieves_and_embeds_contexts_into_prompt() {
        let (embedder, store) = seeded_pipeline_parts();
        let client = EchoClient;
        let pipeline = Pipeline::new(
            embedder.as_ref(),
            &store,
            &client,
            ChatSettings::deterministic("test"),
        );
        let q = question(
            "Q1-2",
            "compute the blade power of the rotor in forward flight",
        );
        let answer = pipeline.answer_question(&q, Mode::Rag, 2).unwrap();
        assert_eq!(answer.retrieved.len(), 2);
        assert_eq!(answer.retrieved[0].chunk_id, "c0");
        for hit in &answer.retrieved {
            assert!(answer.prompt_text.contains(&hit.payload));
        }
    }

    #[test]
    fn no_rag_mode_skips_retrieval() {
        let (embedder, store) = seeded_pipeline_parts();
        let client = EchoClient;
        let pipeline = Pipeline::new(
            embedder.as_ref(),
            &store,
            &client,
            ChatSettings::deterministic("test"),
        );
        let q = question("Q1-1", "what is the elevation angle");
        let answer = pipeline.answer_question(&q, Mode::NoRag, 4).unwrap();
        assert!(answer.retrieved.is_empty());
        assert_eq!(answer.prompt_text, build_prompt(&[], &q.prompt_text));
    }

    #[test]
    fn rag_mode_requires_a_store() {
        let embedder = build_embedder(&EmbedderSpec::offline_hash(32)).unwrap();
        let store = VectorStore::new();
        let client = EchoClient;
        let pipeline = Pipeline::new(
            embedder.as_ref(),
            &store,
            &client,
            ChatSettings::deterministic("test"),
        );
        let q = question("Q", "anything");
        assert!(matches!(
            pipeline.answer_question(&q, Mode::Rag, 2),
            Err(PipelineError::StoreRequired)
        ));
    }

    fn bench_of(questions: Vec<BenchQuestion>) -> BenchSet {
        BenchSet {
            name: "fixture".into(),
            version: "1".into(),
            questions,
        }
    }

    #[test]
    fn run_benchmark_preserves_bench_order_under_concurrency() {
        let (embedder, store) = seeded_pipeline_parts();
        let client = EchoClient;
        let questions: Vec<BenchQuestion> = (0..20)
            .map(|i| question(&format!("Q{i}"), &format!("question text number {i}")))
            .collect();
        let bench = bench_of(questions);
        for in_flight in [1, 3, 8] {
            let pipeline = Pipeline::new(
                embedder.as_ref(),
                &store,
                &client,
                ChatSettings::deterministic("test"),
            )
            .with_in_flight(in_flight);
            let entries = pipeline.run_benchmark(&bench, Mode::Rag, 2);
            assert_eq!(entries.len(), 20);
            for (entry, q) in entries.iter().zip(&bench.questions) {
                assert_eq!(entry.question_id(), q.id);
                assert!(matches!(entry, RunEntry::Answer(_)));
            }
        }
    }

    #[test]
    fn empty_bench_runs_to_empty_output() {
        let (embedder, store) = seeded_pipeline_parts();
        let client = EchoClient;
        let pipeline = Pipeline::new(
            embedder.as_ref(),
            &store,
            &client,
            ChatSettings::deterministic("test"),
        );
        assert!(pipeline
            .run_benchmark(&bench_of(vec![]), Mode::Rag, 2)
            .is_empty());
    }

    #[test]
    fn one_failure_leaves_the_rest_of_the_run_alive() {
        let (embedder, store) = seeded_pipeline_parts();
        let client = FaultyClient {
            poison: "number 7".into(),
        };
        let questions: Vec<BenchQuestion> = (0..20)
            .map(|i| question(&format!("Q{i}"), &format!("question text number {i}")))
            .collect();
        let bench = bench_of(questions);
        let pipeline = Pipeline::new(
            embedder.as_ref(),
            &store,
            &client,
            ChatSettings::deterministic("test"),
        );
        let entries = pipeline.run_benchmark(&bench, Mode::NoRag, 2);
        let answers = entries
            .iter()
            .filter(|e| matches!(e, RunEntry::Answer(_)))
            .count();
        let errors: Vec<&RunEntry> = entries
            .iter()
            .filter(|e| matches!(e, RunEntry::Error { .. }))
            .collect();
        assert_eq!(answers, 19);
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].question_id(), "Q7");
    }

    #[test]
    fn run_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        let entries = vec![
            RunEntry::Answer(PipelineAnswer {
                question_id: "Q1".into(),
                mode: Mode::NoRag,
                retrieved: vec![],
                prompt_text: "p".into(),
                response_text: "r".into(),
                latency_ms: 3,
            }),
            RunEntry::Error {
                question_id: "Q2".into(),
                error: "boom".into(),
            },
        ];
        save_run(&entries, &path).unwrap();
        let loaded = load_run(&path).unwrap();
        assert_eq!(loaded, entries);
    }
}
