//! Synthetic chart production: an LLM imitates a seed table, writes a
//! plotting script for the imitation, and the script is kept only if it
//! runs and renders an image.
//!
//! Generated scripts are untrusted code. The [`sandbox`] limits time and
//! working directory but is not a jail; run against unvetted models inside
//! a container.

pub mod config;
pub mod llm;
pub mod manifest;
pub mod pipeline;
pub mod prompt;
pub mod sandbox;

pub use config::{ConfigError, SimConfig};
pub use llm::{ChatRequest, HttpClient, LlmClient, LlmError, ScriptedClient};
pub use manifest::{JobStatus, ManifestEntry, SimManifest, StatusCounts};
pub use pipeline::{
    generate_label, generate_script, run_pipeline, GenerateError, PipelineConfig, PipelineError, PipelineOutcome, Seed,
};
pub use prompt::{PromptTemplate, Stage};
pub use sandbox::{verify_script, SandboxConfig, SandboxError, VerifyResult};
