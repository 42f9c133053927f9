//! Regenerates `data/demo/transcript.jsonl`, the replay transcript behind
//! the offline demo in the README. Run manually after changing the bundled
//! bench, the bundled corpus, or the prompt template:
//!
//! ```text
//! cargo test -p aerorag-cli --test gen_demo_transcript -- --ignored
//! ```

mod common;

use aerorag_core::bench::{load_bench, BenchQuestion};
use aerorag_core::embedding::{build_embedder, EmbedderSpec};
use aerorag_core::pipeline::{ChatSettings, Mode};
use aerorag_core::vectorstore::VectorStore;

use common::{
    build_demo_store, correct_form_response, refusal_response, transcript_for, workspace_path,
    write_transcript, wrong_form_response,
};

/// Scripted outcome per question for the rag-mode demo: mostly correct,
/// three miscalculations, one refusal, one wrong formula.
fn rag_response(q: &BenchQuestion) -> String {
    match q.id.as_str() {
        "Q1-4" => refusal_response(),
        "Q1-3" => wrong_form_response(q.ground_truth),
        "Q2-1" | "Q3-2" | "Q4-3" => correct_form_response(q, q.ground_truth * 1.107),
        _ => correct_form_response(q, q.ground_truth),
    }
}

/// Scripted outcome per question for the no-rag baseline: six correct,
/// six miscalculations, four wrong formulas, four refusals.
fn norag_response(q: &BenchQuestion) -> String {
    match q.id.as_str() {
        "Q1-1" | "Q1-2" | "Q1-5" | "Q2-3" | "Q3-4" | "Q4-2" => {
            correct_form_response(q, q.ground_truth)
        }
        "Q1-4" | "Q2-2" | "Q3-5" | "Q4-5" => refusal_response(),
        "Q1-3" | "Q2-5" | "Q3-1" | "Q4-4" => wrong_form_response(q.ground_truth * 3.2),
        _ => correct_form_response(q, q.ground_truth * 1.107),
    }
}

#[test]
#[ignore = "writes data/demo/transcript.jsonl; run manually to regenerate"]
fn regenerate_demo_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let (_chunks, store_path) = build_demo_store(dir.path(), 256);
    let store = VectorStore::load(&store_path).unwrap();
    let embedder = build_embedder(&EmbedderSpec::offline_hash(256)).unwrap();
    let bench = load_bench(workspace_path("data/uav_math_bench.json")).unwrap();
    let settings = ChatSettings::deterministic("demo-model");

    let mut entries = transcript_for(
        &bench,
        Mode::Rag,
        2,
        Some((&store, embedder.as_ref())),
        &settings,
        rag_response,
    );
    entries.extend(transcript_for(
        &bench,
        Mode::NoRag,
        2,
        None,
        &settings,
        norag_response,
    ));

    let out = workspace_path("data/demo/transcript.jsonl");
    std::fs::create_dir_all(out.parent().unwrap()).unwrap();
    write_transcript(&entries, &out);
    println!("wrote {} entries to {}", entries.len(), out.display());
}
