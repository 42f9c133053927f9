//! Benchmark question sets: data model, loader, and validation.
//!
//! A bench file is a JSON document carrying a name, a version, and an
//! ordered array of questions. Ground-truth values live in the data file;
//! where a question also names a `formula_id`, the loader recomputes the
//! truth through the oracle registry and rejects the file if data and
//! formula disagree beyond the question tolerance. That double entry is
//! deliberate: it catches silent edits to either side.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ErrorClass;
use crate::oracle::{FormulaRegistry, ParamMap};

/// Name that marks the curated 20-question set; sets carrying it must have
/// exactly five questions in each of the four levels.
pub const CANONICAL_BENCH_NAME: &str = "uav-math-bench";

/// Questions per level in the canonical set.
pub const CANONICAL_PER_LEVEL: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("cannot read bench file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bench file {path} is not valid JSON: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("bench validation failed: {0}")]
    Invalid(String),
}

impl BenchError {
    pub fn class(&self) -> ErrorClass {
        match self {
            BenchError::Io { .. } => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }
}

/// Difficulty tier of a question. Ordering follows increasing difficulty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Basic,
    Intermediate,
    Advanced,
    Expert,
}

impl Level {
    pub const ALL: [Level; 4] = [
        Level::Basic,
        Level::Intermediate,
        Level::Advanced,
        Level::Expert,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Level::Basic => "Basic",
            Level::Intermediate => "Intermediate",
            Level::Advanced => "Advanced",
            Level::Expert => "Expert",
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How close a predicted value must be to the ground truth to count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceKind {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub kind: ToleranceKind,
    pub value: f64,
}

impl ToleranceSpec {
    pub fn relative(value: f64) -> Self {
        ToleranceSpec {
            kind: ToleranceKind::Relative,
            value,
        }
    }

    pub fn absolute(value: f64) -> Self {
        ToleranceSpec {
            kind: ToleranceKind::Absolute,
            value,
        }
    }
}

/// Per-question default. Looser than the headline float tolerance because
/// published accepted answers round at roughly three significant digits.
pub fn default_tolerance() -> ToleranceSpec {
    ToleranceSpec::relative(1e-3)
}

/// One benchmark item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchQuestion {
    pub id: String,
    pub level: Level,
    pub prompt_text: String,
    /// Named parameters (value, unit) available to the oracle.
    #[serde(default)]
    pub parameters: ParamMap,
    pub ground_truth: f64,
    #[serde(default)]
    pub gt_unit: String,
    #[serde(default = "default_tolerance")]
    pub tolerance: ToleranceSpec,
    pub num_variables: u32,
    pub num_nested_equations: u32,
    /// Oracle binding; empty string means the question is data-only.
    #[serde(default)]
    pub formula_id: String,
    /// Keyword groups for formulation judging. Each entry is a group of
    /// `|`-separated alternatives; a response is formulation-correct only
    /// if every group matches.
    pub formula_keywords: Vec<String>,
}

impl BenchQuestion {
    pub fn is_formula_bound(&self) -> bool {
        !self.formula_id.is_empty()
    }
}

/// An ordered, validated question set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSet {
    pub name: String,
    pub version: String,
    pub questions: Vec<BenchQuestion>,
}

impl BenchSet {
    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn question(&self, id: &str) -> Option<&BenchQuestion> {
        self.questions.iter().find(|q| q.id == id)
    }

    pub fn level_counts(&self) -> BTreeMap<Level, usize> {
        let mut counts = BTreeMap::new();
        for q in &self.questions {
            *counts.entry(q.level).or_insert(0) += 1;
        }
        counts
    }
}

/// Load and validate a bench file.
pub fn load_bench<P: AsRef<Path>>(path: P) -> Result<BenchSet, BenchError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let bench: BenchSet = serde_json::from_str(&raw).map_err(|source| BenchError::Parse {
        path: path.display().to_string(),
        source,
    })?;
    validate_bench(&bench)?;
    Ok(bench)
}

/// Structural validation; called by the loader and usable on in-memory sets.
pub fn validate_bench(bench: &BenchSet) -> Result<(), BenchError> {
    if bench.version.is_empty() {
        return Err(BenchError::Invalid("version field is required".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for q in &bench.questions {
        if !seen.insert(q.id.as_str()) {
            return Err(BenchError::Invalid(format!(
                "duplicate question id {}",
                q.id
            )));
        }
        if q.prompt_text.trim().is_empty() {
            return Err(BenchError::Invalid(format!("{}: empty prompt_text", q.id)));
        }
        if !q.ground_truth.is_finite() {
            return Err(BenchError::Invalid(format!(
                "{}: ground_truth must be finite",
                q.id
            )));
        }
        if q.tolerance.value <= 0.0 {
            return Err(BenchError::Invalid(format!(
                "{}: tolerance value must be > 0",
                q.id
            )));
        }
        if q.num_variables < 1 {
            return Err(BenchError::Invalid(format!(
                "{}: num_variables must be >= 1",
                q.id
            )));
        }
        if q.num_nested_equations < 1 {
            return Err(BenchError::Invalid(format!(
                "{}: num_nested_equations must be >= 1",
                q.id
            )));
        }
        if q.formula_keywords.is_empty() {
            return Err(BenchError::Invalid(format!(
                "{}: formula_keywords must be non-empty",
                q.id
            )));
        }
    }

    if bench.name == CANONICAL_BENCH_NAME {
        let counts = bench.level_counts();
        for level in Level::ALL {
            let n = counts.get(&level).copied().unwrap_or(0);
            if n != CANONICAL_PER_LEVEL {
                return Err(BenchError::Invalid(format!(
                    "canonical set must have {CANONICAL_PER_LEVEL} {level} questions, found {n}"
                )));
            }
        }
    }

    // Double entry: recompute every bound question through the oracle and
    // require agreement with the stored truth.
    let registry = FormulaRegistry::standard();
    for q in &bench.questions {
        if !q.is_formula_bound() {
            continue;
        }
        let computed = registry
            .evaluate(&q.formula_id, &q.parameters)
            .map_err(|e| BenchError::Invalid(format!("{}: oracle evaluation failed: {e}", q.id)))?;
        if !crate::evaluator::exact_match(computed, q.ground_truth, &q.tolerance) {
            return Err(BenchError::Invalid(format!(
                "{}: oracle value {computed} disagrees with stored ground truth {} beyond tolerance",
                q.id, q.ground_truth
            )));
        }
    }
    Ok(())
}

/// A non-fatal observation about a loaded bench.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: String,
    pub message: String,
}

/// Check per-level counts and that difficulty statistics rise with level:
/// the Expert mean nested-equation count must be at least the Basic mean.
/// Returns diagnostics, never failures.
pub fn validate_metadata(bench: &BenchSet) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if bench.is_empty() {
        return out;
    }
    let counts = bench.level_counts();
    let sizes: Vec<usize> = Level::ALL
        .iter()
        .map(|l| counts.get(l).copied().unwrap_or(0))
        .collect();
    if sizes.iter().any(|&n| n != sizes[0]) {
        out.push(Diagnostic {
            code: "uneven-levels".into(),
            message: format!(
                "levels are not equal-sized: {:?}",
                Level::ALL.iter().zip(&sizes).collect::<Vec<_>>()
            ),
        });
    }

    if let (Some(basic), Some(expert)) = (
        mean_nested_equations(bench, Level::Basic),
        mean_nested_equations(bench, Level::Expert),
    ) {
        if expert < basic {
            out.push(Diagnostic {
                code: "difficulty-inversion".into(),
                message: format!(
                    "Expert mean nested equations {expert:.2} is below Basic mean {basic:.2}"
                ),
            });
        }
    }
    out
}

/// Mean nested-equation count for one level (None when the level is empty).
pub fn mean_nested_equations(bench: &BenchSet, level: Level) -> Option<f64> {
    let nested: Vec<f64> = bench
        .questions
        .iter()
        .filter(|q| q.level == level)
        .map(|q| f64::from(q.num_nested_equations))
        .collect();
    if nested.is_empty() {
        None
    } else {
        Some(nested.iter().sum::<f64>() / nested.len() as f64)
    }
}

/// Serialize a bench set to the on-disk JSON form.
pub fn save_bench<P: AsRef<Path>>(bench: &BenchSet, path: P) -> Result<(), BenchError> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(bench).expect("bench serialization cannot fail");
    std::fs::write(path, json).map_err(|source| BenchError::Io {
        path: path.display().to_string(),
        source,
    })
}
