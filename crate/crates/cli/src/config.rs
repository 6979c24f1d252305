use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::Context;
use revnote::corpus::EligibilityThresholds;
use revnote::embedding::{PosWeights, SkipGramConfig, EXTERNAL_BACKEND, SKIPGRAM_BACKEND};
use revnote::filter::EmnbConfig;
use revnote::matcher::DEFAULT_TOP_N;
use revnote::preprocess::NormalizerConfig;
use serde::{Deserialize, Serialize};

use crate::user_error;

pub const KNOWN_BACKENDS: [&str; 2] = [SKIPGRAM_BACKEND, EXTERNAL_BACKEND];

/// Settings shared by every subcommand. Read from a JSON file; command-line
/// flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data_dir: PathBuf,
    pub top_n: usize,
    pub pos_weights: PosWeights,
    pub skipgram: SkipGramConfig,
    pub emnb: EmnbConfig,
    pub normalizer: NormalizerConfig,
    pub backends: Vec<String>,
    pub eligibility: EligibilityThresholds,
    pub port: u16,
    /// Shared secret required in the `X-Api-Token` header when set.
    pub api_token: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data_dir: PathBuf::from("data"),
            top_n: DEFAULT_TOP_N,
            pos_weights: PosWeights::default(),
            skipgram: SkipGramConfig::default(),
            emnb: EmnbConfig::default(),
            normalizer: NormalizerConfig::default(),
            backends: KNOWN_BACKENDS.iter().map(|b| b.to_string()).collect(),
            eligibility: EligibilityThresholds::default(),
            port: 8080,
            api_token: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| user_error(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.top_n < 1 {
            return Err(user_error("top_n must be at least 1"));
        }
        self.pos_weights.validate()?;
        self.skipgram.validate()?;
        validate_backends(&self.backends)
    }
}

pub fn validate_backends(backends: &[String]) -> anyhow::Result<()> {
    if backends.is_empty() {
        return Err(user_error("at least one backend is required"));
    }
    let mut seen = HashSet::new();
    for b in backends {
        if !KNOWN_BACKENDS.contains(&b.as_str()) {
            return Err(user_error(format!(
                "unknown backend `{b}` (expected one of: {})",
                KNOWN_BACKENDS.join(", ")
            )));
        }
        if !seen.insert(b) {
            return Err(user_error(format!("backend `{b}` listed twice")));
        }
    }
    Ok(())
}
