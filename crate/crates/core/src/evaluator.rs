//! Scoring: numeric answer extraction, formulation judging, and the metric
//! stack over a benchmark run.
//!
//! A question is *correct* only when its formulation was judged correct AND
//! the extracted number matches the ground truth within tolerance; a lucky
//! number under the wrong formula scores incorrect. Refusals and missing
//! answers count as a prediction of zero in the MSE. Formulation judging is
//! keyword-driven but always overridable through an adjudication file, since
//! the reference process for this call is human inspection.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::bench::{BenchQuestion, BenchSet, Level, ToleranceKind, ToleranceSpec};
use crate::error::ErrorClass;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no run record for bench question {0}")]
    MissingRecord(String),
    #[error("run record for unknown question {0}")]
    UnknownQuestion(String),
    #[error("duplicate run record for question {0}")]
    DuplicateRecord(String),
    #[error("overrides file {path}: {message}")]
    Overrides { path: String, message: String },
}

impl EvalError {
    pub fn class(&self) -> ErrorClass {
        ErrorClass::Validation
    }
}

// ---------------------------------------------------------------------------
// Numeric answer extraction
// ---------------------------------------------------------------------------

/// How the number was located in the response text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionConfidence {
    /// Found after an answer cue such as "answer is" or "≈".
    Explicit,
    /// No cue matched; fell back to the last parseable number.
    Fallback,
}

/// Phrases that signal the model declined to produce a number.
const REFUSAL_MARKERS: &[&str] = &[
    "insufficient input data",
    "insufficient information",
    "not enough information",
    "cannot be determined",
    "need more information",
    "unable to determine",
];

/// Cues that mark the final answer in a response.
const ANSWER_CUES: &[&str] = &["answer is", "approximately", "≈", "result"];

fn number_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // Thousands separators, decimals, and scientific notation; the token
    // must not continue an identifier (rejects the 10 in "log10").
    RE.get_or_init(|| {
        Regex::new(r"[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?(?:[eE][-+]?\d+)?").unwrap()
    })
}

fn parse_number_token(token: &str) -> Option<f64> {
    token.replace(',', "").parse::<f64>().ok()
}

/// True when the text reads as a refusal rather than an answer.
pub fn is_refusal(raw_text: &str) -> bool {
    let lowered = raw_text.to_lowercase();
    REFUSAL_MARKERS.iter().any(|m| lowered.contains(m))
}

/// All numeric tokens in the text with their byte offsets, skipping tokens
/// glued to an identifier (e.g. the 10 of "log10").
fn numeric_tokens(text: &str) -> Vec<(usize, f64)> {
    number_regex()
        .find_iter(text)
        .filter(|m| {
            !text[..m.start()]
                .chars()
                .next_back()
                .is_some_and(|c| c.is_alphanumeric() || c == '_')
        })
        .filter_map(|m| parse_number_token(m.as_str()).map(|v| (m.start(), v)))
        .collect()
}

/// Pull the final numeric answer out of a model response.
///
/// Preference order: the last number that appears after an answer cue, then
/// the last parseable number anywhere. Refusals and number-free responses
/// yield `None`. Never panics; absence is a value.
pub fn extract_final_number(raw_text: &str) -> Option<(f64, ExtractionConfidence)> {
    if is_refusal(raw_text) {
        return None;
    }
    let tokens = numeric_tokens(raw_text);
    if tokens.is_empty() {
        return None;
    }

    // ASCII lowercasing keeps byte offsets aligned with the original text,
    // which the token offsets index into.
    let lowered = raw_text.to_ascii_lowercase();
    let first_cue_end = ANSWER_CUES
        .iter()
        .filter_map(|cue| lowered.find(cue).map(|pos| pos + cue.len()))
        .min();

    if let Some(cue_end) = first_cue_end {
        if let Some((_, value)) = tokens.iter().rev().find(|(start, _)| *start >= cue_end) {
            return Some((*value, ExtractionConfidence::Explicit));
        }
    }
    tokens
        .last()
        .map(|(_, value)| (*value, ExtractionConfidence::Fallback))
}

// ---------------------------------------------------------------------------
// Formulation judging
// ---------------------------------------------------------------------------

/// Verdict on whether a response used the right governing equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulationVerdict {
    Correct,
    Incorrect,
    Absent,
    AdjudicatedCorrect,
    AdjudicatedIncorrect,
}

impl FormulationVerdict {
    pub fn is_correct(&self) -> bool {
        matches!(
            self,
            FormulationVerdict::Correct | FormulationVerdict::AdjudicatedCorrect
        )
    }
}

/// Human adjudications: question id → model id → verdict. Entries here take
/// precedence over the keyword judge.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Overrides(pub BTreeMap<String, BTreeMap<String, OverrideVerdict>>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverrideVerdict {
    Correct,
    Incorrect,
}

impl Overrides {
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| EvalError::Overrides {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&raw).map_err(|e| EvalError::Overrides {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn lookup(&self, question_id: &str, model_id: &str) -> Option<OverrideVerdict> {
        self.0
            .get(question_id)
            .and_then(|m| m.get(model_id))
            .copied()
    }
}

/// LaTeX structural commands dropped wholesale during normalization. The
/// remaining commands keep their names (`\Omega` becomes `omega`), so greek
/// symbols keep their signal.
const STRUCTURAL_LATEX: &[&str] = &[
    "frac",
    "text",
    "mathrm",
    "mathbf",
    "textbf",
    "textit",
    "left",
    "right",
    "cdot",
    "times",
    "quad",
    "qquad",
    "displaystyle",
    "begin",
    "end",
    "label",
    "si",
    "num",
];

/// Greek and symbol transliterations applied after lowercasing.
const TRANSLITERATIONS: &[(char, &str)] = &[
    ('ω', "omega"),
    ('θ', "theta"),
    ('ρ', "rho"),
    ('π', "pi"),
    ('σ', "sigma"),
    ('η', "eta"),
    ('λ', "lambda"),
    ('μ', "mu"),
    ('δ', "delta"),
    ('²', "^2"),
    ('³', "^3"),
];

/// Normalize text for keyword matching: lowercase, drop structural LaTeX
/// commands, strip backslashes so `\omega` reads as `omega`, transliterate
/// greek letters, and remove whitespace and grouping characters.
pub fn normalize_formula_text(text: &str) -> String {
    let mut lowered = text.to_lowercase();
    for cmd in STRUCTURAL_LATEX {
        lowered = lowered.replace(&format!("\\{cmd}"), "");
    }
    lowered = lowered.replace('\\', "");
    let mut out = String::with_capacity(lowered.len());
    for c in lowered.chars() {
        if let Some((_, replacement)) = TRANSLITERATIONS.iter().find(|(from, _)| *from == c) {
            out.push_str(replacement);
            continue;
        }
        if c.is_whitespace() || matches!(c, '{' | '}' | '$' | '~' | '&') {
            continue;
        }
        out.push(c);
    }
    out
}

/// Keyword judge. Each keyword group is `|`-separated alternatives; the
/// verdict is Correct only when every group has at least one alternative
/// present in the normalized response. An override, when present, wins.
pub fn judge_formulation(
    raw_text: &str,
    question: &BenchQuestion,
    model_id: &str,
    overrides: &Overrides,
) -> FormulationVerdict {
    if let Some(adjudicated) = overrides.lookup(&question.id, model_id) {
        return match adjudicated {
            OverrideVerdict::Correct => FormulationVerdict::AdjudicatedCorrect,
            OverrideVerdict::Incorrect => FormulationVerdict::AdjudicatedIncorrect,
        };
    }
    if raw_text.trim().is_empty() {
        return FormulationVerdict::Absent;
    }
    let normalized = normalize_formula_text(raw_text);
    let all_match = question.formula_keywords.iter().all(|group| {
        group
            .split('|')
            .any(|alt| normalized.contains(&normalize_formula_text(alt)))
    });
    if all_match {
        FormulationVerdict::Correct
    } else {
        FormulationVerdict::Incorrect
    }
}

// ---------------------------------------------------------------------------
// Matching and scoring
// ---------------------------------------------------------------------------

/// Tolerance comparison. Relative tolerance is anchored at max(1, |gt|) so
/// near-zero truths do not demand absurd precision.
pub fn exact_match(pred: f64, gt: f64, tol: &ToleranceSpec) -> bool {
    let diff = (pred - gt).abs();
    match tol.kind {
        ToleranceKind::Relative => diff <= tol.value * gt.abs().max(1.0),
        ToleranceKind::Absolute => diff <= tol.value,
    }
}

/// One (model, question) trial after extraction and judging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub question_id: String,
    pub model_id: String,
    pub mode: String,
    pub raw_text: String,
    pub extracted_value: Option<f64>,
    pub refused: bool,
    pub formulation_verdict: FormulationVerdict,
    pub retrieved_ids: Vec<String>,
}

/// Raw integer counts behind a [`ScoreReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCounts {
    pub correct: usize,
    pub formulation_correct: usize,
    pub miscalculated: usize,
    pub refused: usize,
    pub extraction_absent: usize,
}

/// Per-model aggregate over one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub model_id: String,
    pub n: usize,
    pub correct_pct: f64,
    pub correct_form_pct: f64,
    pub miscalc_pct: f64,
    /// Miscalculation rate among formulation-correct answers only.
    pub misc_among_correct_form_pct: f64,
    pub mse: f64,
    /// log10 of the MSE; negative infinity marks a perfect run and is
    /// serialized as JSON null.
    #[serde(
        serialize_with = "serialize_log10_mse",
        deserialize_with = "deserialize_log10_mse"
    )]
    pub log10_mse: f64,
    pub per_level_accuracy: BTreeMap<Level, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<RawCounts>,
}

fn serialize_log10_mse<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn deserialize_log10_mse<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let v: Option<f64> = Option::deserialize(d)?;
    Ok(v.unwrap_or(f64::NEG_INFINITY))
}

/// Is this record correct under the composed rule: formulation correct AND
/// numeric match within the question tolerance?
fn record_is_correct(record: &RunRecord, question: &BenchQuestion) -> bool {
    record.formulation_verdict.is_correct()
        && record
            .extracted_value
            .is_some_and(|pred| exact_match(pred, question.ground_truth, &question.tolerance))
}

/// Prediction used in the MSE: the extracted value, or zero for refusals
/// and missing extractions.
fn mse_prediction(record: &RunRecord) -> f64 {
    if record.refused {
        0.0
    } else {
        record.extracted_value.unwrap_or(0.0)
    }
}

fn index_records<'a>(
    records: &'a [RunRecord],
    bench: &BenchSet,
) -> Result<HashMap<&'a str, &'a RunRecord>, EvalError> {
    let mut by_id: HashMap<&str, &RunRecord> = HashMap::new();
    for record in records {
        if bench.question(&record.question_id).is_none() {
            return Err(EvalError::UnknownQuestion(record.question_id.clone()));
        }
        if by_id.insert(&record.question_id, record).is_some() {
            return Err(EvalError::DuplicateRecord(record.question_id.clone()));
        }
    }
    for q in &bench.questions {
        if !by_id.contains_key(q.id.as_str()) {
            return Err(EvalError::MissingRecord(q.id.clone()));
        }
    }
    Ok(by_id)
}

/// Compute the full metric stack over one run (one record per question).
pub fn score_run(records: &[RunRecord], bench: &BenchSet) -> Result<ScoreReport, EvalError> {
    let by_id = index_records(records, bench)?;
    let n = bench.len();
    let model_id = records
        .first()
        .map(|r| r.model_id.clone())
        .unwrap_or_default();

    let mut correct = 0usize;
    let mut formulation_correct = 0usize;
    let mut miscalculated = 0usize;
    let mut refused = 0usize;
    let mut extraction_absent = 0usize;
    let mut squared_error_sum = 0.0f64;

    for q in &bench.questions {
        let record = by_id[q.id.as_str()];
        let form_ok = record.formulation_verdict.is_correct();
        let is_correct = record_is_correct(record, q);
        if form_ok {
            formulation_correct += 1;
            if !is_correct {
                miscalculated += 1;
            }
        }
        if is_correct {
            correct += 1;
        }
        if record.refused {
            refused += 1;
        }
        if record.extracted_value.is_none() {
            extraction_absent += 1;
        }
        let err = mse_prediction(record) - q.ground_truth;
        squared_error_sum += err * err;
    }

    let pct = |count: usize| 100.0 * count as f64 / n as f64;
    let mse = squared_error_sum / n as f64;
    let misc_among = if formulation_correct == 0 {
        0.0
    } else {
        100.0 * miscalculated as f64 / formulation_correct as f64
    };

    Ok(ScoreReport {
        model_id,
        n,
        correct_pct: pct(correct),
        correct_form_pct: pct(formulation_correct),
        miscalc_pct: pct(miscalculated),
        misc_among_correct_form_pct: misc_among,
        mse,
        log10_mse: if mse == 0.0 {
            f64::NEG_INFINITY
        } else {
            mse.log10()
        },
        per_level_accuracy: per_level_accuracy(records, bench)?,
        counts: Some(RawCounts {
            correct,
            formulation_correct,
            miscalculated,
            refused,
            extraction_absent,
        }),
    })
}

/// Accuracy per difficulty level, percent. Only levels present in the bench
/// appear in the map.
pub fn per_level_accuracy(
    records: &[RunRecord],
    bench: &BenchSet,
) -> Result<BTreeMap<Level, f64>, EvalError> {
    let by_id = index_records(records, bench)?;
    let mut correct: BTreeMap<Level, usize> = BTreeMap::new();
    let mut totals: BTreeMap<Level, usize> = BTreeMap::new();
    for q in &bench.questions {
        *totals.entry(q.level).or_insert(0) += 1;
        if record_is_correct(by_id[q.id.as_str()], q) {
            *correct.entry(q.level).or_insert(0) += 1;
        }
    }
    Ok(totals
        .into_iter()
        .map(|(level, total)| {
            let c = correct.get(&level).copied().unwrap_or(0);
            (level, 100.0 * c as f64 / total as f64)
        })
        .collect())
}

/// Tolerance when checking that a percentage implies an integer count.
/// Percentages are reported to two decimals, so the implied count can be
/// off by at most n * 0.005 / 100 plus float noise.
const COUNT_INTEGRALITY_TOL: f64 = 0.05;

/// Verify the arithmetic identities a score report must satisfy:
/// correct = formulation-correct − miscalculated, the MisC definition, the
/// per-level mean, and integrality of every implied count. Returns the list
/// of violations (empty for any report produced by [`score_run`]).
pub fn consistency_check(report: &ScoreReport) -> Vec<String> {
    let mut violations = Vec::new();
    if report.n == 0 {
        return violations;
    }
    let n = report.n as f64;

    let implied = |pct: f64, denom: f64, label: &str, violations: &mut Vec<String>| -> f64 {
        let count = pct * denom / 100.0;
        if (count - count.round()).abs() > COUNT_INTEGRALITY_TOL {
            violations.push(format!(
                "{label} {pct}% of {denom} implies non-integer count {count}"
            ));
        }
        count.round()
    };

    let correct = implied(report.correct_pct, n, "correct", &mut violations);
    let form = implied(report.correct_form_pct, n, "correct-form", &mut violations);
    let miscalc = implied(report.miscalc_pct, n, "miscalc", &mut violations);

    // Identity A: correct + miscalculated = formulation-correct.
    if (correct + miscalc - form).abs() > 1e-9 {
        violations.push(format!(
            "identity A violated: correct {correct} + miscalc {miscalc} != correct-form {form}"
        ));
    }

    // Identity B: MisC = miscalculated / formulation-correct.
    if form > 0.0 {
        let expected = 100.0 * miscalc / form;
        if (report.misc_among_correct_form_pct - expected).abs() > 0.01 {
            violations.push(format!(
                "identity B violated: MisC {} != {expected:.4}",
                report.misc_among_correct_form_pct
            ));
        }
    }

    // Identity C: overall accuracy is the unweighted mean of per-level
    // accuracies when levels are equal-sized (checked only when the level
    // map is populated and divides n evenly).
    if !report.per_level_accuracy.is_empty()
        && report.n.is_multiple_of(report.per_level_accuracy.len())
    {
        let mean: f64 = report.per_level_accuracy.values().sum::<f64>()
            / report.per_level_accuracy.len() as f64;
        if (report.correct_pct - mean).abs() > 0.01 {
            violations.push(format!(
                "identity C violated: overall {} != per-level mean {mean:.4}",
                report.correct_pct
            ));
        }
    }

    if let Some(counts) = &report.counts {
        if counts.correct + counts.miscalculated != counts.formulation_correct {
            violations.push("raw counts violate identity A".into());
        }
    }
    violations
}

/// Assemble run records from raw response text: extraction, refusal
/// detection, and formulation judging in one pass.
pub fn build_record(
    question: &BenchQuestion,
    model_id: &str,
    mode: &str,
    raw_text: &str,
    retrieved_ids: Vec<String>,
    overrides: &Overrides,
) -> RunRecord {
    let refused = is_refusal(raw_text);
    let extracted_value = extract_final_number(raw_text).map(|(v, _)| v);
    RunRecord {
        question_id: question.id.clone(),
        model_id: model_id.to_string(),
        mode: mode.to_string(),
        raw_text: raw_text.to_string(),
        extracted_value,
        refused,
        formulation_verdict: judge_formulation(raw_text, question, model_id, overrides),
        retrieved_ids,
    }
}
