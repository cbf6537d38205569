//! TOML configuration for `simulate`.
//!
//! ```toml
//! [llm]
//! provider = "http"          # or "mock" for the offline client
//! endpoint = "https://api.openai.com/v1/chat/completions"
//! model = "gpt-4"
//! temperature = 0.7
//! timeout_secs = 120
//!
//! [sandbox]
//! interpreter = ["python3"]
//! timeout = 30
//! image_extensions = ["png", "jpg", "svg", "pdf"]
//! isolate_network = true
//!
//! [pipeline]
//! max_attempts = 3
//! concurrency = 4
//! validate_plot_calls = false
//! ```
//!
//! The API key is read from `CHARTREL_API_KEY` only. `CHARTREL_LLM_ENDPOINT`
//! and `CHARTREL_LLM_MODEL` override the file.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{HttpClient, LlmClient, ScriptedClient};
use crate::pipeline::PipelineConfig;
use crate::sandbox::SandboxConfig;

pub const API_KEY_VAR: &str = "CHARTREL_API_KEY";
pub const ENDPOINT_VAR: &str = "CHARTREL_LLM_ENDPOINT";
pub const MODEL_VAR: &str = "CHARTREL_LLM_MODEL";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    #[default]
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub provider: Provider,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Sampling temperature; omitted from requests when unset.
    pub temperature: Option<f64>,
    pub timeout_secs: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig { provider: Provider::Http, endpoint: None, model: None, temperature: None, timeout_secs: 120 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub max_attempts: u32,
    pub concurrency: usize,
    pub validate_plot_calls: bool,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let d = PipelineConfig::default();
        PipelineSection {
            max_attempts: d.max_attempts,
            concurrency: d.concurrency,
            validate_plot_calls: d.validate_plot_calls,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub llm: LlmConfig,
    pub sandbox: SandboxConfig,
    pub pipeline: PipelineSection,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.pipeline.max_attempts == 0 {
            return bad("pipeline.max_attempts must be at least 1");
        }
        if self.pipeline.concurrency == 0 {
            return bad("pipeline.concurrency must be at least 1");
        }
        if self.sandbox.interpreter.is_empty() {
            return bad("sandbox.interpreter must not be empty");
        }
        if self.sandbox.timeout.is_zero() {
            return bad("sandbox.timeout must be positive");
        }
        if self.sandbox.image_extensions.is_empty() {
            return bad("sandbox.image_extensions must not be empty");
        }
        if let Some(t) = self.llm.temperature {
            if !(0.0..=2.0).contains(&t) {
                return bad("llm.temperature must be within [0, 2]");
            }
        }
        if self.llm.provider == Provider::Http && self.llm.timeout_secs == 0 {
            return bad("llm.timeout_secs must be positive");
        }
        Ok(())
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            max_attempts: self.pipeline.max_attempts,
            concurrency: self.pipeline.concurrency,
            validate_plot_calls: self.pipeline.validate_plot_calls,
            temperature: self.llm.temperature,
            sandbox: self.sandbox.clone(),
        }
    }

    /// Builds the configured client, applying environment overrides.
    pub fn client(&self) -> Result<Arc<dyn LlmClient>, ConfigError> {
        match self.llm.provider {
            Provider::Mock => Ok(Arc::new(ScriptedClient::offline())),
            Provider::Http => {
                let env = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
                let endpoint = env(ENDPOINT_VAR)
                    .or_else(|| self.llm.endpoint.clone())
                    .ok_or_else(|| ConfigError::Invalid(format!("llm.endpoint is required (or set {ENDPOINT_VAR})")))?;
                let model = env(MODEL_VAR)
                    .or_else(|| self.llm.model.clone())
                    .ok_or_else(|| ConfigError::Invalid(format!("llm.model is required (or set {MODEL_VAR})")))?;
                Ok(Arc::new(HttpClient::new(
                    endpoint,
                    model,
                    env(API_KEY_VAR),
                    Duration::from_secs(self.llm.timeout_secs),
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_file() {
        let cfg = SimConfig::from_toml("").unwrap();
        assert_eq!(cfg.pipeline.max_attempts, 3);
        assert_eq!(cfg.pipeline.concurrency, 4);
        assert_eq!(cfg.sandbox.timeout, Duration::from_secs(30));
        assert!(!cfg.pipeline.validate_plot_calls);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(SimConfig::from_toml("[llm]\napi_key = \"x\"\n").is_err());
        assert!(SimConfig::from_toml("[extra]\n").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(SimConfig::from_toml("[pipeline]\nconcurrency = 0\n").is_err());
        assert!(SimConfig::from_toml("[sandbox]\ninterpreter = []\n").is_err());
        assert!(SimConfig::from_toml("[sandbox]\ntimeout = -1\n").is_err());
    }

    #[test]
    fn mock_provider_and_fractional_timeout() {
        let cfg = SimConfig::from_toml("[llm]\nprovider = \"mock\"\n[sandbox]\ntimeout = 0.5\n").unwrap();
        assert_eq!(cfg.sandbox.timeout, Duration::from_millis(500));
        assert_eq!(cfg.client().unwrap().model_id(), "offline-mock");
    }

    #[test]
    fn http_without_endpoint_is_invalid() {
        if std::env::var_os(ENDPOINT_VAR).is_none() {
            assert!(SimConfig::from_toml("").unwrap().client().is_err());
        }
    }
}
