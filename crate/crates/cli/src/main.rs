//! `aerorag`: command-line driver for the retrieval-augmented evaluation
//! harness. Ingest a LaTeX corpus, embed it, query it, run a question set
//! against a chat model (live, recorded, or replayed), then score and
//! report.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use aerorag_core::corpus::DEFAULT_PAGE_DELIMITER;
use aerorag_core::embedding::{EmbedderSpec, ProviderKind};
use aerorag_core::llm_client::ChatDialect;
use aerorag_core::pipeline::{Mode, DEFAULT_IN_FLIGHT, DEFAULT_TOP_K};

use commands::CliError;

#[derive(Parser)]
#[command(
    name = "aerorag",
    version,
    about = "Retrieval-augmented evaluation harness for UAV engineering math"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment LaTeX documents into page-level chunks.
    Ingest {
        /// UTF-8 LaTeX input files.
        paths: Vec<PathBuf>,
        /// Literal line that marks a page boundary.
        #[arg(long, default_value = DEFAULT_PAGE_DELIMITER)]
        delimiter: String,
        /// Output chunk file (JSON lines).
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed a chunk file into a vector store.
    Embed {
        /// Chunk file produced by `ingest`.
        #[arg(long)]
        chunks: PathBuf,
        #[command(flatten)]
        embedder: EmbedderArgs,
        /// Output store file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Search a store and print the ranked chunks.
    Query {
        /// Question text.
        question: String,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        k: usize,
        #[command(flatten)]
        embedder: EmbedderArgs,
    },
    /// Run a benchmark through the pipeline and write a run file.
    RunBench {
        #[arg(long)]
        bench: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Rag)]
        mode: ModeArg,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        k: usize,
        /// Model identifier sent to the provider.
        #[arg(long)]
        model: String,
        #[arg(long, value_enum)]
        dialect: DialectArg,
        /// Base URL of the provider (remote dialects).
        #[arg(long)]
        endpoint: Option<String>,
        /// Environment variable holding the bearer credential.
        #[arg(long)]
        credential_env: Option<String>,
        /// Vector store file (rag mode).
        #[arg(long)]
        store: Option<PathBuf>,
        /// Transcript file: replayed from when --dialect replay, recorded
        /// into when --record.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Record every (request, response) pair into --transcript.
        #[arg(long)]
        record: bool,
        #[command(flatten)]
        embedder: EmbedderArgs,
        #[arg(long, default_value_t = 0.0)]
        temperature: f64,
        #[arg(long, default_value_t = 2048)]
        max_tokens: u32,
        /// Concurrently executing questions.
        #[arg(long, default_value_t = DEFAULT_IN_FLIGHT)]
        in_flight: usize,
        /// Output run file (JSON lines); a config sidecar is written next
        /// to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract, judge, and score a run file into a score JSON.
    Score {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        bench: PathBuf,
        /// Adjudication file: question id -> model id -> verdict.
        #[arg(long)]
        overrides: Option<PathBuf>,
        /// Model id override when the run has no config sidecar.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a comparison table, CSV, and plot data from score files.
    Report {
        /// Score JSON files, one per model.
        scores: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Evaluate a registered formula (use `aerorag oracle list` to list).
    Oracle {
        formula_id: String,
        /// Parameter as name=value or name=value[unit]; repeatable.
        #[arg(long = "param")]
        params: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Rag,
    NoRag,
}

impl From<ModeArg> for Mode {
    fn from(arg: ModeArg) -> Mode {
        match arg {
            ModeArg::Rag => Mode::Rag,
            ModeArg::NoRag => Mode::NoRag,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DialectArg {
    Openai,
    Ollama,
    Replay,
}

impl DialectArg {
    fn to_chat_dialect(self) -> Option<ChatDialect> {
        match self {
            DialectArg::Openai => Some(ChatDialect::Openai),
            DialectArg::Ollama => Some(ChatDialect::Ollama),
            DialectArg::Replay => None,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbedderKindArg {
    OfflineHash,
    Openai,
    Ollama,
}

/// Embedding flags shared by embed, query, and run-bench. The same flags
/// must be passed when querying a store as when building it; the store
/// header records the builder's identity and mismatches are rejected.
#[derive(Args, Clone)]
struct EmbedderArgs {
    #[arg(long = "embedder", value_enum, default_value_t = EmbedderKindArg::OfflineHash)]
    kind: EmbedderKindArg,
    /// Embedding model identifier.
    #[arg(long, default_value = "trigram-hash")]
    embed_model: String,
    /// Vector dimension.
    #[arg(long, default_value_t = 256)]
    dimension: usize,
    /// Base URL of the embedding service (remote kinds).
    #[arg(long)]
    embed_endpoint: Option<String>,
    /// Environment variable holding the embedding credential.
    #[arg(long)]
    embed_credential_env: Option<String>,
}

impl EmbedderArgs {
    fn to_spec(&self) -> EmbedderSpec {
        EmbedderSpec {
            provider_kind: match self.kind {
                EmbedderKindArg::OfflineHash => ProviderKind::OfflineHash,
                EmbedderKindArg::Openai => ProviderKind::RemoteOpenaiDialect,
                EmbedderKindArg::Ollama => ProviderKind::RemoteOllamaDialect,
            },
            model_id: self.embed_model.clone(),
            dimension: self.dimension,
            endpoint: self.embed_endpoint.clone(),
            credential_env: self.embed_credential_env.clone(),
        }
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Ingest {
            paths,
            delimiter,
            out,
        } => commands::cmd_ingest(&paths, &delimiter, &out),
        Command::Embed {
            chunks,
            embedder,
            out,
        } => commands::cmd_embed(&chunks, &embedder.to_spec(), &out),
        Command::Query {
            question,
            store,
            k,
            embedder,
        } => commands::cmd_query(&store, &embedder.to_spec(), &question, k),
        Command::RunBench {
            bench,
            mode,
            k,
            model,
            dialect,
            endpoint,
            credential_env,
            store,
            transcript,
            record,
            embedder,
            temperature,
            max_tokens,
            in_flight,
            out,
        } => commands::cmd_run_bench(&commands::RunBenchParams {
            bench_path: bench,
            mode: mode.into(),
            k,
            model_id: model,
            dialect: dialect.to_chat_dialect(),
            endpoint,
            credential_env,
            store_path: store,
            transcript_path: transcript,
            record,
            embedder_spec: embedder.to_spec(),
            temperature,
            max_tokens,
            in_flight,
            out,
        }),
        Command::Score {
            run,
            bench,
            overrides,
            model,
            out,
        } => commands::cmd_score(&run, &bench, overrides.as_deref(), model.as_deref(), &out),
        Command::Report { scores, out_dir } => commands::cmd_report(&scores, &out_dir),
        Command::Oracle { formula_id, params } => commands::cmd_oracle(&formula_id, &params),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not errors.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(output) => {
            println!("{output}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
