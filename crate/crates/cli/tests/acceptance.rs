//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured value (run with `--nocapture` to see them).
//!
//! The criteria pin the oracle's golden vectors, the scorer's arithmetic
//! identities, retrieval soundness against a naive oracle, prompt
//! byte-exactness, end-to-end replay determinism through the CLI, and the
//! tolerance decisions the scorer must reproduce.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use aerorag_core::bench::{
    default_tolerance, load_bench, BenchQuestion, BenchSet, Level, ToleranceSpec,
};
use aerorag_core::embedding::{build_embedder, dot, normalize, EmbedderSpec};
use aerorag_core::evaluator::{
    consistency_check, exact_match, per_level_accuracy, score_run, FormulationVerdict, RunRecord,
};
use aerorag_core::oracle::{blade_power, elevation_angle, KMH_TO_MS};
use aerorag_core::pipeline::{build_prompt, ChatSettings, Mode};
use aerorag_core::vectorstore::{StoredEntry, VectorStore};
use aerorag_core::EmbeddingVector;

use common::*;

fn pass(criterion: u32, detail: &str) {
    println!("ACCEPTANCE {criterion} PASS: {detail}");
}

// ---------------------------------------------------------------------------
// 1. Blade power golden vector
// ---------------------------------------------------------------------------

#[test]
fn acceptance_1_blade_power_golden_vector() {
    let start = Instant::now();
    let value = blade_power(1.5, 110.0 * KMH_TO_MS, 300.0, 0.4).unwrap();
    assert!(
        (value - 1.7918).abs() <= 0.0005,
        "blade power {value} outside 1.7918 +/- 0.0005"
    );
    assert_eq!(
        format!("{value:.2}"),
        "1.79",
        "must round to the published 1.79"
    );
    assert!(start.elapsed().as_millis() < 100, "must be instantaneous");
    pass(
        1,
        &format!("blade_power(1.5, 110 km/h, 300, 0.4) = {value}"),
    );
}

// ---------------------------------------------------------------------------
// 2. Elevation angle golden vector
// ---------------------------------------------------------------------------

#[test]
fn acceptance_2_elevation_angle_golden_vector() {
    let value = elevation_angle((47.0, 23.0), (65.0, 73.0, 15.0)).unwrap();
    assert!(
        (value - 15.76).abs() <= 0.05,
        "elevation angle {value} outside 15.76 +/- 0.05"
    );
    assert_eq!(
        format!("{value:.1}"),
        "15.8",
        "consistent with approximately 15.7-15.8 degrees"
    );
    pass(
        2,
        &format!("elevation_angle((47,23),(65,73,15)) = {value} deg"),
    );
}

// ---------------------------------------------------------------------------
// 3. Scorer identities over random masks + published MisC values
// ---------------------------------------------------------------------------

fn bench20() -> BenchSet {
    let mut questions = Vec::new();
    for (prefix, level) in [
        ("Q1", Level::Basic),
        ("Q2", Level::Intermediate),
        ("Q3", Level::Advanced),
        ("Q4", Level::Expert),
    ] {
        for i in 1..=5 {
            questions.push(BenchQuestion {
                id: format!("{prefix}-{i}"),
                level,
                prompt_text: "p".into(),
                parameters: BTreeMap::new(),
                ground_truth: 100.0,
                gt_unit: String::new(),
                tolerance: default_tolerance(),
                num_variables: 1,
                num_nested_equations: 1,
                formula_id: String::new(),
                formula_keywords: vec!["kw".into()],
            });
        }
    }
    BenchSet {
        name: "acceptance".into(),
        version: "1".into(),
        questions,
    }
}

fn mask_record(q: &BenchQuestion, form_ok: bool, numeric_ok: bool) -> RunRecord {
    RunRecord {
        question_id: q.id.clone(),
        model_id: "mask".into(),
        mode: "rag".into(),
        raw_text: String::new(),
        extracted_value: if numeric_ok {
            Some(q.ground_truth)
        } else {
            Some(q.ground_truth + 37.5)
        },
        refused: false,
        formulation_verdict: if form_ok {
            FormulationVerdict::Correct
        } else {
            FormulationVerdict::Incorrect
        },
        retrieved_ids: vec![],
    }
}

#[test]
fn acceptance_3_scorer_identities_hold_exactly_over_10000_masks() {
    let bench = bench20();
    let mut rng = StdRng::seed_from_u64(31337);
    for trial in 0..10_000 {
        let records: Vec<RunRecord> = bench
            .questions
            .iter()
            .map(|q| mask_record(q, rng.random_bool(0.6), rng.random_bool(0.5)))
            .collect();
        let report = score_run(&records, &bench).unwrap();
        let counts = report.counts.expect("score_run always reports counts");

        // Identity A: correct + miscalculated == formulation-correct.
        assert_eq!(
            counts.correct + counts.miscalculated,
            counts.formulation_correct,
            "identity A failed on trial {trial}"
        );

        // Identity B: MisC == 100 * miscalc / form-correct, exactly.
        let expected_misc = if counts.formulation_correct == 0 {
            0.0
        } else {
            100.0 * counts.miscalculated as f64 / counts.formulation_correct as f64
        };
        assert_eq!(
            report.misc_among_correct_form_pct, expected_misc,
            "identity B failed on trial {trial}"
        );

        // Identity C: overall accuracy == unweighted mean of the four
        // equal-sized level accuracies, exactly.
        let mean: f64 = report.per_level_accuracy.values().sum::<f64>()
            / report.per_level_accuracy.len() as f64;
        assert_eq!(
            report.correct_pct, mean,
            "identity C failed on trial {trial}"
        );

        assert!(consistency_check(&report).is_empty(), "trial {trial}");
    }

    // The arithmetically consistent MisC values from the published
    // comparison, reproduced from their implied counts at n=20.
    let published: [(usize, usize, f64); 7] = [
        (15, 9, 60.00),
        (17, 2, 11.76),
        (15, 4, 26.67),
        (14, 11, 78.57),
        (12, 10, 83.33),
        (18, 7, 38.89),
        (13, 6, 46.15),
    ];
    for (form, miscalc, expected) in published {
        let records: Vec<RunRecord> = bench
            .questions
            .iter()
            .enumerate()
            .map(|(i, q)| mask_record(q, i < form, i >= miscalc))
            .collect();
        let report = score_run(&records, &bench).unwrap();
        let rounded = (report.misc_among_correct_form_pct * 100.0).round() / 100.0;
        assert_eq!(
            rounded, expected,
            "MisC for counts ({miscalc}/{form}) must be {expected}"
        );
    }
    pass(
        3,
        "identities A, B, C exact over 10,000 masks; 7 published MisC values reproduced",
    );
}

// ---------------------------------------------------------------------------
// 4. Per-level accuracy cross-check
// ---------------------------------------------------------------------------

#[test]
fn acceptance_4_per_level_accuracy_cross_check() {
    let bench = bench20();
    let per_level_correct = [4usize, 3, 4, 4];
    let records: Vec<RunRecord> = bench
        .questions
        .iter()
        .enumerate()
        .map(|(i, q)| mask_record(q, i % 5 < per_level_correct[i / 5], true))
        .collect();
    let levels = per_level_accuracy(&records, &bench).unwrap();
    assert_eq!(levels[&Level::Basic], 80.0);
    assert_eq!(levels[&Level::Intermediate], 60.0);
    assert_eq!(levels[&Level::Advanced], 80.0);
    assert_eq!(levels[&Level::Expert], 80.0);
    let report = score_run(&records, &bench).unwrap();
    assert_eq!(report.correct_pct, 75.0);
    assert_eq!(format!("{:.2}", report.correct_pct), "75.00");
    pass(
        4,
        "(4,3,4,4) correct per level -> 80/60/80/80, overall 75.00%",
    );
}

// ---------------------------------------------------------------------------
// 5. MSE conventions
// ---------------------------------------------------------------------------

#[test]
fn acceptance_5_mse_conventions() {
    let gt = 64_207_051.66f64;
    let mut bench = bench20();
    bench.questions.truncate(1);
    bench.questions[0].ground_truth = gt;

    // Prediction 70.2 with the wrong formulation.
    let mut record = mask_record(&bench.questions[0], false, false);
    record.extracted_value = Some(70.2);
    let report = score_run(&[record], &bench).unwrap();
    let expected = (gt - 70.2) * (gt - 70.2);
    assert!(
        ((report.mse - expected) / expected).abs() <= 1e-6,
        "squared error {} vs {expected}",
        report.mse
    );

    // A refusal on the same question scores gt^2 exactly.
    let refusal = RunRecord {
        refused: true,
        extracted_value: None,
        formulation_verdict: FormulationVerdict::Absent,
        ..mask_record(&bench.questions[0], false, false)
    };
    let report = score_run(&[refusal], &bench).unwrap();
    assert_eq!(
        report.mse,
        gt * gt,
        "refusal must score ground truth squared exactly"
    );
    pass(
        5,
        &format!(
            "(gt-70.2)^2 = {expected:.6e}; refusal -> gt^2 = {:.6e}",
            gt * gt
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Retrieval soundness
// ---------------------------------------------------------------------------

fn character_trigrams(text: &str) -> std::collections::HashSet<String> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    chars.windows(3).map(|w| w.iter().collect()).collect()
}

fn trigram_share(question: &str, seed: &str) -> f64 {
    let q = character_trigrams(question);
    let s = character_trigrams(seed);
    if q.is_empty() {
        return 0.0;
    }
    q.intersection(&s).count() as f64 / q.len() as f64
}

fn random_word(rng: &mut StdRng) -> String {
    let len = rng.random_range(4..9);
    (0..len)
        .map(|_| (b'a' + rng.random_range(0..26u8)) as char)
        .collect()
}

#[test]
fn acceptance_6_retrieval_soundness() {
    // Part one: 50-chunk corpus, one seeded formula string per question;
    // the seeded chunk must rank first for at least 90 of 100 questions
    // sharing >= 30% of their trigrams with the seed.
    let mut rng = StdRng::seed_from_u64(60606);
    let corpus: Vec<(String, String)> = (0..50)
        .map(|i| {
            let formula: String = (0..6)
                .map(|_| random_word(&mut rng))
                .collect::<Vec<_>>()
                .join(" ");
            let text = format!(
                "Section {i}: in the governing relation {formula}, substitute the given \
                 parameters and simplify to obtain the quantity of interest for case {i}."
            );
            (formula, text)
        })
        .collect();

    let embedder = build_embedder(&EmbedderSpec::offline_hash(256)).unwrap();
    let texts: Vec<String> = corpus.iter().map(|(_, t)| t.clone()).collect();
    let vectors = embedder.embed_texts(&texts).unwrap();
    let mut store = VectorStore::new();
    store
        .upsert(
            texts
                .iter()
                .enumerate()
                .zip(vectors)
                .map(|((i, text), vector)| StoredEntry {
                    chunk_id: format!("seed-{i:02}"),
                    vector,
                    payload: text.clone(),
                })
                .collect(),
        )
        .unwrap();

    let mut asked = 0;
    let mut rank_one = 0;
    for variant in 0..2 {
        for (idx, (formula, chunk_text)) in corpus.iter().enumerate() {
            let question = match variant {
                0 => format!("Q: compute the quantity using {formula} with the given parameters"),
                _ => format!("Q: apply the relation {formula} and simplify to a value"),
            };
            assert!(trigram_share(&question, chunk_text) >= 0.3);
            asked += 1;
            let qv = embedder.embed_one(&question).unwrap();
            if store.top_k(&qv, 1).unwrap()[0].chunk_id == format!("seed-{idx:02}") {
                rank_one += 1;
            }
        }
    }
    assert_eq!(asked, 100);
    assert!(
        rank_one >= 90,
        "only {rank_one}/100 seeded chunks ranked first"
    );

    // Part two: top-k equals a naive full-sort oracle on 1,000 random
    // stores, exactly.
    let mut rng = StdRng::seed_from_u64(123_456);
    for _ in 0..1000 {
        let dim = rng.random_range(2..6);
        let n = rng.random_range(1..20);
        let make_vec = |rng: &mut StdRng| -> Vec<f64> {
            let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            if raw.iter().all(|x| x.abs() < 1e-9) {
                vec![1.0; dim]
            } else {
                raw
            }
        };
        let entries: Vec<StoredEntry> = (0..n)
            .map(|i| StoredEntry {
                chunk_id: format!("e{i:03}"),
                vector: EmbeddingVector {
                    values: normalize(&make_vec(&mut rng)).unwrap(),
                    spec_id: "r".into(),
                },
                payload: String::new(),
            })
            .collect();
        let query = EmbeddingVector {
            values: normalize(&make_vec(&mut rng)).unwrap(),
            spec_id: "r".into(),
        };
        let k = rng.random_range(1..=n + 2);

        let mut store = VectorStore::new();
        store.upsert(entries.clone()).unwrap();
        let got: Vec<String> = store
            .top_k(&query, k)
            .unwrap()
            .into_iter()
            .map(|r| r.chunk_id)
            .collect();

        let mut scored: Vec<(String, f64)> = entries
            .iter()
            .map(|e| (e.chunk_id.clone(), dot(&e.vector.values, &query.values)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let want: Vec<String> = scored.into_iter().take(k).map(|(id, _)| id).collect();
        assert_eq!(got, want, "store disagrees with naive oracle");
    }
    pass(
        6,
        &format!(
            "seeded chunk rank-1 for {rank_one}/100; 1,000 random stores match the naive oracle"
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. Prompt byte-exactness
// ---------------------------------------------------------------------------

#[test]
fn acceptance_7_prompt_byte_exactness() {
    const HEADER: &str = "To answer the questions, use only the documents provided.\nFormulations are provided for all the questions in the provided documents; however, to calculate the result, you may use your calculation skills.";

    let fixtures: [(&[&str], &str); 3] = [
        (
            &["The blade power follows $P_0(1 + 3V^2/\\Omega^2R^2)$."],
            "Compute the blade power of the UAV in forward flight.",
        ),
        (
            &[
                "First context.",
                "Second context with\nan embedded newline.",
            ],
            "What is the elevation angle?",
        ),
        (&[], "A question with no retrieved context."),
    ];

    for (contexts, question) in fixtures {
        let owned: Vec<String> = contexts.iter().map(|s| s.to_string()).collect();
        let got = build_prompt(&owned, question);
        let want = format!("{HEADER}\n\n{}\n\nQuestion: {question}", owned.join("\n\n"));
        assert_eq!(got, want, "prompt must match the template byte-for-byte");
    }
    pass(
        7,
        "3 fixture context/question pairs instantiate the template byte-exactly",
    );
}

// ---------------------------------------------------------------------------
// 8. End-to-end determinism through the CLI
// ---------------------------------------------------------------------------

#[test]
fn acceptance_8_end_to_end_replay_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let bench_path = workspace_path("data/uav_math_bench.json");
    let bench = load_bench(&bench_path).unwrap();
    let settings = ChatSettings::deterministic("determinism-model");
    let entries = transcript_for(&bench, Mode::NoRag, 4, None, &settings, |q| {
        match q.id.as_str() {
            "Q1-4" => refusal_response(),
            "Q2-1" => correct_form_response(q, q.ground_truth * 1.107),
            _ => correct_form_response(q, q.ground_truth),
        }
    });
    let transcript = dir.path().join("transcript.jsonl");
    write_transcript(&entries, &transcript);

    let run_once = |tag: &str| -> (std::path::PathBuf, std::path::PathBuf, std::path::PathBuf) {
        let run = dir.path().join(format!("run_{tag}.jsonl"));
        let score = dir.path().join(format!("score_{tag}.json"));
        let report_dir = dir.path().join(format!("report_{tag}"));
        let out = run_cli([
            "run-bench",
            "--bench",
            bench_path.to_str().unwrap(),
            "--mode",
            "no-rag",
            "--model",
            "determinism-model",
            "--dialect",
            "replay",
            "--transcript",
            transcript.to_str().unwrap(),
            "--out",
            run.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));
        let out = run_cli([
            "score",
            "--run",
            run.to_str().unwrap(),
            "--bench",
            bench_path.to_str().unwrap(),
            "--out",
            score.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));
        let out = run_cli([
            "report",
            score.to_str().unwrap(),
            "--out-dir",
            report_dir.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));
        (run, score, report_dir)
    };

    let started = Instant::now();
    let (run_a, score_a, report_a) = run_once("a");
    let first_run_elapsed = started.elapsed();
    let (run_b, score_b, report_b) = run_once("b");

    assert_eq!(
        std::fs::read(&run_a).unwrap(),
        std::fs::read(&run_b).unwrap(),
        "run files must be byte-identical"
    );
    assert_eq!(
        std::fs::read(&score_a).unwrap(),
        std::fs::read(&score_b).unwrap(),
        "score files must be byte-identical"
    );
    for name in ["report.txt", "metrics.csv", "log10_mse.csv"] {
        assert_eq!(
            std::fs::read(report_a.join(name)).unwrap(),
            std::fs::read(report_b.join(name)).unwrap(),
            "{name} must be byte-identical"
        );
    }
    assert!(
        first_run_elapsed.as_secs_f64() < 5.0,
        "20-question replay run took {first_run_elapsed:?}, budget is 5 s"
    );
    pass(8, &format!(
        "two replay runs byte-identical through run/score/report; first pass took {first_run_elapsed:?}"
    ));
}

// ---------------------------------------------------------------------------
// 9. Tolerance behavior
// ---------------------------------------------------------------------------

#[test]
fn acceptance_9_tolerance_behavior() {
    assert!(
        exact_match(1.79205, 1.79, &ToleranceSpec::relative(2e-3)),
        "published rounding 1.79205 vs 1.79 must match at relative 2e-3"
    );
    assert!(
        !exact_match(0.5535, 0.5, &ToleranceSpec::relative(1e-3)),
        "0.5535 vs 0.5 must be rejected at relative 1e-3"
    );
    pass(
        9,
        "accepts (1.79205, 1.79) at rel 2e-3; rejects (0.5535, 0.5) at rel 1e-3",
    );
}
