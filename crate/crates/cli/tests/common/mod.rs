//! Shared helpers for CLI integration tests: driving the binary, building
//! demo stores, and synthesizing replay transcripts.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aerorag_core::bench::{BenchQuestion, BenchSet};
use aerorag_core::embedding::Embedder;
use aerorag_core::llm_client::{ChatMessage, ChatRequest, TranscriptEntry};
use aerorag_core::pipeline::{build_prompt, ChatSettings, Mode};
use aerorag_core::vectorstore::VectorStore;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_aerorag")
}

pub fn workspace_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

pub fn run_cli<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

pub fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

pub fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("exit code present")
}

/// Ingest the bundled corpus and embed it at the given dimension, leaving
/// chunk and store files in `dir`. Returns (chunks_path, store_path).
pub fn build_demo_store(dir: &Path, dimension: usize) -> (PathBuf, PathBuf) {
    let chunks = dir.join("chunks.jsonl");
    let store = dir.join("store.jsonl");
    let corpus_dir = workspace_path("data/corpus");
    let mut inputs: Vec<PathBuf> = std::fs::read_dir(&corpus_dir)
        .expect("corpus dir exists")
        .map(|e| e.unwrap().path())
        .collect();
    inputs.sort();

    let mut args: Vec<String> = vec!["ingest".into()];
    args.extend(inputs.iter().map(|p| p.display().to_string()));
    args.push("--out".into());
    args.push(chunks.display().to_string());
    let out = run_cli(&args);
    assert_eq!(exit_code(&out), 0, "ingest failed: {}", stderr_of(&out));

    let out = run_cli([
        "embed",
        "--chunks",
        chunks.to_str().unwrap(),
        "--dimension",
        &dimension.to_string(),
        "--out",
        store.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "embed failed: {}", stderr_of(&out));
    (chunks, store)
}

/// Build the exact chat request the pipeline will send for one question, so
/// a transcript can be synthesized without any remote provider.
pub fn request_for(
    question: &BenchQuestion,
    mode: Mode,
    k: usize,
    store: Option<(&VectorStore, &dyn Embedder)>,
    settings: &ChatSettings,
) -> ChatRequest {
    let contexts: Vec<String> = match (mode, store) {
        (Mode::Rag, Some((store, embedder))) => {
            let qv = embedder.embed_one(&question.prompt_text).unwrap();
            store
                .top_k(&qv, k)
                .unwrap()
                .into_iter()
                .map(|r| r.payload)
                .collect()
        }
        _ => Vec::new(),
    };
    let prompt = build_prompt(&contexts, &question.prompt_text);
    ChatRequest {
        model_id: settings.model_id.clone(),
        messages: vec![ChatMessage::user(prompt)],
        temperature: settings.temperature,
        max_tokens: settings.max_tokens,
    }
}

/// Synthesize transcript entries for every question with a scripted
/// response.
pub fn transcript_for(
    bench: &BenchSet,
    mode: Mode,
    k: usize,
    store: Option<(&VectorStore, &dyn Embedder)>,
    settings: &ChatSettings,
    respond: impl Fn(&BenchQuestion) -> String,
) -> Vec<TranscriptEntry> {
    bench
        .questions
        .iter()
        .map(|q| {
            let request = request_for(q, mode, k, store, settings);
            TranscriptEntry {
                digest: request.digest(),
                request,
                response_text: respond(q),
                latency_ms: 0,
            }
        })
        .collect()
}

pub fn write_transcript(entries: &[TranscriptEntry], path: &Path) {
    let mut out = String::new();
    for entry in entries {
        out.push_str(&serde_json::to_string(entry).unwrap());
        out.push('\n');
    }
    std::fs::write(path, out).unwrap();
}

/// A formulation line per bundled question, carrying that question's
/// keyword groups so the judge scores it formulation-correct.
pub fn formula_line(question_id: &str) -> &'static str {
    match question_id {
        "Q1-1" => "theta = arctan(h / horizontal distance)",
        "Q1-2" => "P_blade = P_0 (1 + 3V^2 / (Omega^2 R^2))",
        "Q1-3" => "latency = task cycles / allocated CPU rate",
        "Q1-4" => "the attenuation factor follows from the wavelength and scattering distribution",
        "Q1-5" => "P_r = P_t + G - L, transmit power plus gain minus path loss",
        "Q2-1" => "P_LoS = 1 / (1 + a exp(-b (theta - a)))",
        "Q2-2" => "P_i (sqrt(1 + V^4/(4 v0^4)) - V^2/(2 v0^2))^(1/2)",
        "Q2-3" => "C = B log2(1 + SNR)",
        "Q2-4" => "the achievable rate is C = B log2(1 + SNR)",
        "Q2-5" => "sum the circuit and amplifier power components",
        "Q3-1" => "L = 20 log10(4 pi f d / c) + eta_LoS",
        "Q3-2" => "P_par = 1/2 d_0 rho s A V^3",
        "Q3-3" => "C = B log2(1 + SNR) with the noise power at the receiver",
        "Q3-4" => "B = rate / log2(1 + SNR), solving for the bandwidth",
        "Q3-5" => "P_hov = W^(3/2) / sqrt(2 rho A)",
        "Q4-1" => "average loss = P_LoS L_LoS + (1 - P_LoS) L_NLoS",
        "Q4-2" => "total = blade + induced + parasite power",
        "Q4-3" => "tau = S / (B log2(1 + P g / N0)), the transmission delay",
        "Q4-4" => "utility ratio = achieved throughput / offered load",
        "Q4-5" => "total power = propulsion + hover + communication + avionics",
        other => panic!("no formula line for {other}"),
    }
}

/// A response that the scorer will judge formulation-correct with the
/// given final value.
pub fn correct_form_response(question: &BenchQuestion, value: f64) -> String {
    format!(
        "From the provided documents, the governing relation is {}. Substituting the given \
         values and simplifying yields the result. The answer is approximately {}.",
        formula_line(&question.id),
        format_answer(value)
    )
}

/// A response using the wrong governing equation (no keyword group matches).
pub fn wrong_form_response(value: f64) -> String {
    format!(
        "Applying the standard kinetic relation E = 1/2 m u^2 with the given quantities, \
         the answer is approximately {}.",
        format_answer(value)
    )
}

pub fn refusal_response() -> String {
    "The answer is Insufficient input data.".to_string()
}

/// Render an answer at full precision so an exactly-right scripted response
/// scores a zero squared error, exercising the perfect-run sentinel.
pub fn format_answer(value: f64) -> String {
    format!("{value}")
}
