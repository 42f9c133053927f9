//! Run configuration persisted beside every benchmark run for provenance.

use serde::{Deserialize, Serialize};

use aerorag_core::llm_client::ChatDialect;
use aerorag_core::pipeline::Mode;

/// Everything that shaped a run. Written verbatim next to the run output so
/// any score or report can be traced back to its inputs. All defaults are
/// deterministic; the only randomness a run can contain comes from a remote
/// provider, and that is captured in the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub k: usize,
    pub model_id: String,
    pub dialect: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credential_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedder_id: Option<String>,
    pub bench_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub store_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript_path: Option<String>,
    pub record: bool,
    pub temperature: f64,
    pub max_tokens: u32,
    pub in_flight: usize,
    /// The template and question are sent as one user message; recorded here
    /// so transcripts are interpretable without reading the code.
    pub message_packing: String,
}

impl RunConfig {
    pub fn dialect_name(dialect: Option<ChatDialect>) -> String {
        match dialect {
            Some(ChatDialect::Openai) => "openai".into(),
            Some(ChatDialect::Ollama) => "ollama".into(),
            None => "replay".into(),
        }
    }
}

/// Sidecar config path for a run output path: `runs/a.jsonl` maps to
/// `runs/a.config.json`.
pub fn config_path_for(run_path: &std::path::Path) -> std::path::PathBuf {
    let stem = run_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    run_path.with_file_name(format!("{stem}.config.json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn sidecar_path_replaces_extension() {
        assert_eq!(
            config_path_for(Path::new("runs/demo.jsonl")),
            Path::new("runs/demo.config.json")
        );
        assert_eq!(
            config_path_for(Path::new("out")),
            Path::new("out.config.json")
        );
    }
}
