//! Command implementations behind the CLI surface.

use std::path::{Path, PathBuf};

use aerorag_core::bench::{load_bench, validate_metadata};
use aerorag_core::corpus::{chunk_by_page, corpus_stats, load_chunks, load_documents, save_chunks};
use aerorag_core::embedding::{build_embedder, Embedder, EmbedderSpec};
use aerorag_core::error::ErrorClass;
use aerorag_core::evaluator::{
    build_record, consistency_check, score_run, Overrides, RunRecord, ScoreReport,
};
use aerorag_core::llm_client::{
    ChatClient, ChatDialect, HttpChatClient, RecordingClient, ReplayClient,
};
use aerorag_core::oracle::{FormulaRegistry, ParamMap};
use aerorag_core::pipeline::{load_run, save_run, ChatSettings, Mode, Pipeline, RunEntry};
use aerorag_core::vectorstore::{StoredEntry, VectorStore};

use crate::config::{config_path_for, RunConfig};
use crate::report;

/// CLI failure carrying its exit code: 1 validation, 2 provider, 3 I/O.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Provider(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Validation(_) => 1,
            CliError::Provider(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Validation(m) => write!(f, "validation: {m}"),
            CliError::Provider(m) => write!(f, "provider: {m}"),
            CliError::Io(m) => write!(f, "io: {m}"),
        }
    }
}

fn classify(class: ErrorClass, message: String) -> CliError {
    match class {
        ErrorClass::Validation => CliError::Validation(message),
        ErrorClass::Provider => CliError::Provider(message),
        ErrorClass::Io => CliError::Io(message),
    }
}

macro_rules! from_core_error {
    ($ty:ty) => {
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                classify(e.class(), e.to_string())
            }
        }
    };
}

from_core_error!(aerorag_core::corpus::CorpusError);
from_core_error!(aerorag_core::embedding::EmbedError);
from_core_error!(aerorag_core::vectorstore::StoreError);
from_core_error!(aerorag_core::llm_client::ClientError);
from_core_error!(aerorag_core::bench::BenchError);
from_core_error!(aerorag_core::evaluator::EvalError);
from_core_error!(aerorag_core::oracle::OracleError);
from_core_error!(aerorag_core::pipeline::PipelineError);

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

pub fn cmd_ingest(paths: &[PathBuf], delimiter: &str, out: &Path) -> Result<String, CliError> {
    if paths.is_empty() {
        return Err(CliError::Usage(
            "ingest requires at least one input file".into(),
        ));
    }
    let documents = load_documents(paths)?;
    let mut seen = std::collections::BTreeSet::new();
    for doc in &documents {
        if !seen.insert(doc.doc_id.clone()) {
            return Err(CliError::Validation(format!(
                "duplicate document id {} (two inputs share a file stem)",
                doc.doc_id
            )));
        }
    }
    let mut chunks = Vec::new();
    for doc in &documents {
        chunks.extend(chunk_by_page(doc, delimiter));
    }
    save_chunks(&chunks, out)?;
    let stats = corpus_stats(&chunks);
    Ok(format!("{stats}\nwrote {}", out.display()))
}

// ---------------------------------------------------------------------------
// embed
// ---------------------------------------------------------------------------

pub fn cmd_embed(chunks_path: &Path, spec: &EmbedderSpec, out: &Path) -> Result<String, CliError> {
    let chunks = load_chunks(chunks_path)?;
    if chunks.is_empty() {
        return Err(CliError::Validation(format!(
            "chunk file {} is empty",
            chunks_path.display()
        )));
    }
    let embedder = build_embedder(spec)?;
    let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
    let vectors = embedder.embed_texts(&texts)?;
    let mut store = VectorStore::new();
    store.set_embedder_id(spec.id());
    store.upsert(
        chunks
            .iter()
            .zip(vectors)
            .map(|(chunk, vector)| StoredEntry {
                chunk_id: chunk.chunk_id.clone(),
                vector,
                payload: chunk.text.clone(),
            })
            .collect(),
    )?;
    store.save(out)?;
    Ok(format!(
        "embedded {} chunks with {} -> {}",
        store.len(),
        spec.id(),
        out.display()
    ))
}

/// Open a store and check it against the embedder the caller intends to
/// query it with.
fn load_store_checked(store_path: &Path, spec: &EmbedderSpec) -> Result<VectorStore, CliError> {
    if !store_path.exists() {
        return Err(CliError::Io(format!(
            "store file {} does not exist (run `embed` first)",
            store_path.display()
        )));
    }
    let store = VectorStore::load(store_path)?;
    if let Some(stored_id) = store.embedder_id() {
        if stored_id != spec.id() {
            return Err(CliError::Validation(format!(
                "store {} was built with embedder {stored_id}, but the current flags select {}",
                store_path.display(),
                spec.id()
            )));
        }
    }
    Ok(store)
}

// ---------------------------------------------------------------------------
// query
// ---------------------------------------------------------------------------

pub fn cmd_query(
    store_path: &Path,
    spec: &EmbedderSpec,
    question: &str,
    k: usize,
) -> Result<String, CliError> {
    let store = load_store_checked(store_path, spec)?;
    let embedder = build_embedder(spec)?;
    let query = embedder.embed_one(question)?;
    let hits = store.top_k(&query, k)?;
    let mut out = String::new();
    for hit in &hits {
        out.push_str(&format!(
            "rank {:<2} score {:+.4}  {}\n{}\n\n",
            hit.rank, hit.score, hit.chunk_id, hit.payload
        ));
    }
    out.push_str(&format!("{} results", hits.len()));
    Ok(out)
}

// ---------------------------------------------------------------------------
// run-bench
// ---------------------------------------------------------------------------

pub struct RunBenchParams {
    pub bench_path: PathBuf,
    pub mode: Mode,
    pub k: usize,
    pub model_id: String,
    pub dialect: Option<ChatDialect>,
    pub endpoint: Option<String>,
    pub credential_env: Option<String>,
    pub store_path: Option<PathBuf>,
    pub transcript_path: Option<PathBuf>,
    pub record: bool,
    pub embedder_spec: EmbedderSpec,
    pub temperature: f64,
    pub max_tokens: u32,
    pub in_flight: usize,
    pub out: PathBuf,
}

fn build_client(params: &RunBenchParams) -> Result<Box<dyn ChatClient>, CliError> {
    match params.dialect {
        None => {
            let transcript = params
                .transcript_path
                .as_ref()
                .ok_or_else(|| CliError::Usage("replay dialect requires --transcript".into()))?;
            Ok(Box::new(ReplayClient::from_path(transcript)?))
        }
        Some(dialect) => {
            let endpoint = params
                .endpoint
                .as_ref()
                .ok_or_else(|| CliError::Usage("remote dialects require --endpoint".into()))?;
            let http = HttpChatClient::new(dialect, endpoint, params.credential_env.clone());
            if params.record {
                let transcript = params
                    .transcript_path
                    .as_ref()
                    .ok_or_else(|| CliError::Usage("--record requires --transcript".into()))?;
                Ok(Box::new(RecordingClient::new(http, transcript)?))
            } else {
                Ok(Box::new(http))
            }
        }
    }
}

pub fn cmd_run_bench(params: &RunBenchParams) -> Result<String, CliError> {
    let bench = load_bench(&params.bench_path)?;
    for diagnostic in validate_metadata(&bench) {
        eprintln!("note: {}: {}", diagnostic.code, diagnostic.message);
    }

    let (store, embedder): (VectorStore, Box<dyn Embedder>) = match params.mode {
        Mode::Rag => {
            let store_path = params
                .store_path
                .as_ref()
                .ok_or_else(|| CliError::Usage("rag mode requires --store".into()))?;
            let store = load_store_checked(store_path, &params.embedder_spec)?;
            (store, build_embedder(&params.embedder_spec)?)
        }
        // The store and embedder are unused in no-rag mode.
        Mode::NoRag => (
            VectorStore::new(),
            build_embedder(&EmbedderSpec::offline_hash(8))?,
        ),
    };

    let client = build_client(params)?;
    let settings = ChatSettings {
        model_id: params.model_id.clone(),
        temperature: params.temperature,
        max_tokens: params.max_tokens,
    };
    let pipeline = Pipeline::new(embedder.as_ref(), &store, client.as_ref(), settings)
        .with_in_flight(params.in_flight);
    let entries = pipeline.run_benchmark(&bench, params.mode, params.k);

    save_run(&entries, &params.out)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", params.out.display())))?;

    let config = RunConfig {
        mode: params.mode,
        k: params.k,
        model_id: params.model_id.clone(),
        dialect: RunConfig::dialect_name(params.dialect),
        endpoint: params.endpoint.clone(),
        credential_env: params.credential_env.clone(),
        embedder_id: match params.mode {
            Mode::Rag => Some(params.embedder_spec.id()),
            Mode::NoRag => None,
        },
        bench_path: params.bench_path.display().to_string(),
        store_path: params.store_path.as_ref().map(|p| p.display().to_string()),
        transcript_path: params
            .transcript_path
            .as_ref()
            .map(|p| p.display().to_string()),
        record: params.record,
        temperature: params.temperature,
        max_tokens: params.max_tokens,
        in_flight: params.in_flight,
        message_packing: "single_user_message".into(),
    };
    let config_path = config_path_for(&params.out);
    write_file(
        &config_path,
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&config).expect("config serialization cannot fail")
        ),
    )?;

    let answers = entries
        .iter()
        .filter(|e| matches!(e, RunEntry::Answer(_)))
        .count();
    let errors = entries.len() - answers;
    Ok(format!(
        "{} questions: {answers} answered, {errors} errored\nrun: {}\nconfig: {}",
        entries.len(),
        params.out.display(),
        config_path.display()
    ))
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

pub fn cmd_score(
    run_path: &Path,
    bench_path: &Path,
    overrides_path: Option<&Path>,
    model_override: Option<&str>,
    out: &Path,
) -> Result<String, CliError> {
    let bench = load_bench(bench_path)?;
    let entries = load_run(run_path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", run_path.display())))?;
    if entries.is_empty() {
        return Err(CliError::Validation(format!(
            "run file {} contains no entries",
            run_path.display()
        )));
    }

    let overrides = match overrides_path {
        Some(path) => Overrides::load(path)?,
        None => Overrides::default(),
    };

    // Model identity comes from the run's config sidecar unless overridden.
    let model_id = match model_override {
        Some(m) => m.to_string(),
        None => {
            let config_path = config_path_for(run_path);
            let raw = std::fs::read_to_string(&config_path).map_err(|_| {
                CliError::Validation(format!(
                    "no config sidecar at {}; pass --model explicitly",
                    config_path.display()
                ))
            })?;
            let config: RunConfig = serde_json::from_str(&raw)
                .map_err(|e| CliError::Validation(format!("config sidecar unreadable: {e}")))?;
            config.model_id
        }
    };

    let records: Vec<RunRecord> = entries
        .iter()
        .map(|entry| match entry {
            RunEntry::Answer(answer) => {
                let question = bench.question(&answer.question_id).ok_or_else(|| {
                    CliError::Validation(format!(
                        "run contains unknown question {}",
                        answer.question_id
                    ))
                })?;
                Ok(build_record(
                    question,
                    &model_id,
                    answer.mode.name(),
                    &answer.response_text,
                    answer
                        .retrieved
                        .iter()
                        .map(|r| r.chunk_id.clone())
                        .collect(),
                    &overrides,
                ))
            }
            // A provider failure means the model never answered; that is a
            // refusal with no extractable value.
            RunEntry::Error { question_id, .. } => Ok(RunRecord {
                question_id: question_id.clone(),
                model_id: model_id.clone(),
                mode: String::new(),
                raw_text: String::new(),
                extracted_value: None,
                refused: true,
                formulation_verdict: aerorag_core::evaluator::FormulationVerdict::Absent,
                retrieved_ids: vec![],
            }),
        })
        .collect::<Result<_, CliError>>()?;

    let report = score_run(&records, &bench)?;
    let violations = consistency_check(&report);
    if !violations.is_empty() {
        return Err(CliError::Validation(format!(
            "score report failed its own consistency check: {violations:?}"
        )));
    }

    write_file(
        out,
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&report).expect("report serialization cannot fail")
        ),
    )?;
    Ok(format!(
        "model {}: correct {:.2}%, correct-form {:.2}%, miscalc {:.2}%, MisC {:.2}%\nscore: {}",
        report.model_id,
        report.correct_pct,
        report.correct_form_pct,
        report.miscalc_pct,
        report.misc_among_correct_form_pct,
        out.display()
    ))
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

pub fn cmd_report(score_paths: &[PathBuf], out_dir: &Path) -> Result<String, CliError> {
    if score_paths.is_empty() {
        return Err(CliError::Usage(
            "report requires at least one score file".into(),
        ));
    }
    let mut reports: Vec<ScoreReport> = Vec::with_capacity(score_paths.len());
    for path in score_paths {
        let raw = read_file(path)?;
        let report: ScoreReport = serde_json::from_str(&raw).map_err(|e| {
            CliError::Validation(format!("score file {} malformed: {e}", path.display()))
        })?;
        reports.push(report);
    }

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;
    let table = report::render_table(&reports);
    write_file(&out_dir.join("report.txt"), &table)?;
    write_file(&out_dir.join("metrics.csv"), &report::render_csv(&reports))?;
    write_file(
        &out_dir.join("log10_mse.csv"),
        &report::render_plot_data(&reports),
    )?;
    Ok(format!(
        "{table}\nwrote report.txt, metrics.csv, log10_mse.csv under {}",
        out_dir.display()
    ))
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

/// Parse `name=value` or `name=value[unit]`.
fn parse_param(raw: &str) -> Result<(String, (f64, String)), CliError> {
    let (name, rest) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--param {raw}: expected name=value[unit]")))?;
    let (value_str, unit) = match rest.split_once('[') {
        Some((v, u)) => {
            let unit = u.strip_suffix(']').ok_or_else(|| {
                CliError::Usage(format!("--param {raw}: unterminated unit bracket"))
            })?;
            (v, unit.to_string())
        }
        None => (rest, String::new()),
    };
    let value: f64 = value_str
        .parse()
        .map_err(|_| CliError::Usage(format!("--param {raw}: {value_str} is not a number")))?;
    Ok((name.trim().to_string(), (value, unit)))
}

pub fn cmd_oracle(formula_id: &str, raw_params: &[String]) -> Result<String, CliError> {
    let registry = FormulaRegistry::standard();
    if formula_id == "list" {
        let mut out = String::new();
        for id in registry.formula_ids() {
            let binding = registry.get(id).expect("listed id resolves");
            let params: Vec<String> = binding
                .required_params
                .iter()
                .map(|(name, unit)| {
                    if unit.is_empty() {
                        (*name).to_string()
                    } else {
                        format!("{name}[{unit}]")
                    }
                })
                .collect();
            out.push_str(&format!(
                "{id}({})\n  {}\n",
                params.join(", "),
                binding.reference
            ));
        }
        return Ok(out.trim_end().to_string());
    }

    let mut params = ParamMap::new();
    for raw in raw_params {
        let (name, value) = parse_param(raw)?;
        params.insert(name, value);
    }
    let value = registry.evaluate(formula_id, &params)?;
    Ok(format!(
        "{formula_id} = {}  (full precision: {value})",
        report::fmt_sig6(value)
    ))
}
