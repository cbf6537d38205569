//! Seed table -> imitated label -> plotting script -> verified image.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use chartrel::lct::{parse_lct, LctError, LctTable};
use thiserror::Error;

use crate::llm::{ChatRequest, LlmClient, LlmError};
use crate::manifest::{write_atomic, JobStatus, ManifestEntry, SimManifest};
use crate::prompt::{strip_code_fences, PromptTemplate};
use crate::sandbox::{verify_script, SandboxConfig};

/// Substrings accepted as evidence of a plotting call when
/// [`PipelineConfig::validate_plot_calls`] is on.
pub const PLOT_CALLS: [&str; 12] = [
    ".plot(",
    ".bar(",
    ".barh(",
    ".scatter(",
    ".pie(",
    ".hist(",
    ".stackplot(",
    ".fill_between(",
    ".boxplot(",
    ".errorbar(",
    ".step(",
    ".imshow(",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Tries per stage: label requests, then script generations.
    pub max_attempts: u32,
    /// Jobs run at once.
    pub concurrency: usize,
    pub validate_plot_calls: bool,
    pub temperature: Option<f64>,
    pub sandbox: SandboxConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            max_attempts: 3,
            concurrency: 4,
            validate_plot_calls: false,
            temperature: None,
            sandbox: SandboxConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("seed table does not parse: {0}")]
    InvalidSeed(#[source] LctError),
    #[error(transparent)]
    Transport(#[from] LlmError),
    #[error("validation failed: {0}")]
    ValidationFailed(String),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no seeds given")]
    NoSeeds,
    #[error("invalid pipeline configuration: {0}")]
    ConfigInvalid(String),
    #[error("I/O error under output root: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seed {
    /// File-name-safe identifier; names every artifact of the job.
    pub id: String,
    pub label: String,
}

impl Seed {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        Seed { id: id.into(), label: label.into() }
    }
}

fn label_problem(table: &LctTable) -> Option<String> {
    if table.col_entities().iter().any(|e| e.trim().is_empty()) {
        return Some("blank column entity".into());
    }
    if table.row_entities().iter().any(|e| e.trim().is_empty()) {
        return Some("blank row entity".into());
    }
    None
}

/// Checks a candidate label: it must parse and name every row and column.
/// The row count is free to differ from the seed.
pub fn validate_label(text: &str) -> Result<LctTable, String> {
    let table = parse_lct(text).map_err(|e| e.to_string())?;
    match label_problem(&table) {
        Some(p) => Err(p),
        None => Ok(table),
    }
}

/// Asks for an imitation of `seed`, retrying invalid replies up to
/// `config.max_attempts` times. Transport failures are returned at once.
pub fn generate_label(
    seed: &str,
    client: &dyn LlmClient,
    template: &PromptTemplate,
    config: &PipelineConfig,
) -> Result<String, GenerateError> {
    parse_lct(seed).map_err(GenerateError::InvalidSeed)?;
    let request = ChatRequest {
        stage: template.stage,
        system: template.system_text.clone(),
        user: template.user_message(seed.trim()),
        temperature: config.temperature,
    };
    let mut last = String::from("no attempts made");
    for attempt in 1..=config.max_attempts {
        let reply = client.complete(&request)?;
        let label = strip_code_fences(&reply);
        match validate_label(label) {
            Ok(_) => return Ok(label.to_string()),
            Err(reason) => {
                log::debug!("label attempt {attempt} rejected: {reason}");
                last = reason;
            }
        }
    }
    Err(GenerateError::ValidationFailed(format!("{} invalid label(s), last: {last}", config.max_attempts)))
}

/// Asks for a plotting script for `label` (one request).
pub fn generate_script(
    label: &str,
    client: &dyn LlmClient,
    template: &PromptTemplate,
    config: &PipelineConfig,
) -> Result<String, GenerateError> {
    parse_lct(label).map_err(GenerateError::InvalidSeed)?;
    let request = ChatRequest {
        stage: template.stage,
        system: template.system_text.clone(),
        user: template.user_message(label.trim()),
        temperature: config.temperature,
    };
    let reply = client.complete(&request)?;
    let script = strip_code_fences(&reply);
    if script.is_empty() {
        return Err(GenerateError::ValidationFailed("empty script".into()));
    }
    if config.validate_plot_calls && !PLOT_CALLS.iter().any(|c| script.contains(c)) {
        return Err(GenerateError::ValidationFailed("script makes no recognised plotting call".into()));
    }
    Ok(script.to_string())
}

/// Counts requests passing through to the real client.
struct Counting<'a> {
    inner: &'a dyn LlmClient,
    calls: AtomicUsize,
}

impl LlmClient for Counting<'_> {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }

    fn model_id(&self) -> &str {
        self.inner.model_id()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub manifest: SimManifest,
    /// Requests sent during this run.
    pub llm_calls: usize,
    /// Entries left untouched because they were already verified.
    pub reused: usize,
    /// Jobs this run that ended skipped on a transport error.
    pub transport_failures: usize,
    /// Jobs processed this run (excludes reused entries).
    pub processed: usize,
}

struct Layout {
    root: PathBuf,
}

impl Layout {
    fn label(&self, id: &str) -> String {
        format!("labels/{id}.csv")
    }

    fn script(&self, id: &str) -> String {
        format!("scripts/{id}.txt")
    }

    fn image(&self, id: &str, ext: &str) -> String {
        format!("images/{id}.{ext}")
    }

    fn abs(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

fn check_inputs(seeds: &[Seed], root: &Path, config: &PipelineConfig) -> Result<(), PipelineError> {
    if seeds.is_empty() {
        return Err(PipelineError::NoSeeds);
    }
    if config.max_attempts == 0 || config.concurrency == 0 {
        return Err(PipelineError::ConfigInvalid("max_attempts and concurrency must be at least 1".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for s in seeds {
        if !valid_id(&s.id) {
            return Err(PipelineError::ConfigInvalid(format!("seed id {:?} is not a safe file name", s.id)));
        }
        if !seen.insert(&s.id) {
            return Err(PipelineError::ConfigInvalid(format!("duplicate seed id {:?}", s.id)));
        }
    }
    if root.exists() && !root.is_dir() {
        return Err(PipelineError::ConfigInvalid(format!("output root {} is not a directory", root.display())));
    }
    if let Some(base) = &config.sandbox.scratch_base {
        if !base.is_dir() {
            return Err(PipelineError::ConfigInvalid(format!("scratch base {} is not a directory", base.display())));
        }
    }
    Ok(())
}

struct Job<'a> {
    seed: &'a Seed,
    previous: Option<ManifestEntry>,
}

struct JobEnv<'a> {
    client: &'a dyn LlmClient,
    layout: &'a Layout,
    config: &'a PipelineConfig,
    data: PromptTemplate,
    image: PromptTemplate,
}

/// Runs one job, sending every status change to `emit`. Returns whether the
/// job ended on a transport error.
fn run_job(job: Job<'_>, env: &JobEnv<'_>, emit: &dyn Fn(ManifestEntry)) -> std::io::Result<bool> {
    let id = &job.seed.id;
    let created_at = job
        .previous
        .as_ref()
        .map(|e| e.created_at.clone())
        .unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    let mut entry = ManifestEntry {
        id: id.clone(),
        sim_label_path: None,
        script_path: None,
        image_path: None,
        status: JobStatus::Pending,
        attempts: 0,
        model_id: env.client.model_id().to_string(),
        created_at,
        last_error: None,
    };
    emit(entry.clone());

    // a label written by an earlier run is reused rather than re-requested
    let label_rel = env.layout.label(id);
    let earlier = job
        .previous
        .as_ref()
        .filter(|e| e.sim_label_path.as_deref() == Some(label_rel.as_str()))
        .and_then(|_| std::fs::read_to_string(env.layout.abs(&label_rel)).ok())
        .filter(|text| validate_label(text).is_ok());
    let label = match earlier {
        Some(text) => text,
        None => match generate_label(&job.seed.label, env.client, &env.data, env.config) {
            Ok(label) => {
                std::fs::write(env.layout.abs(&label_rel), &label)?;
                label
            }
            Err(e) => {
                let transport = matches!(e, GenerateError::Transport(_));
                entry.status = JobStatus::Skipped;
                entry.last_error = Some(e.to_string());
                emit(entry);
                return Ok(transport);
            }
        },
    };
    entry.sim_label_path = Some(label_rel);
    entry.status = JobStatus::LabelDone;
    emit(entry.clone());

    let mut transport = false;
    for attempt in 1..=env.config.max_attempts {
        entry.attempts = attempt;
        let script = match generate_script(&label, env.client, &env.image, env.config) {
            Ok(s) => s,
            Err(e) => {
                transport = matches!(e, GenerateError::Transport(_));
                entry.last_error = Some(e.to_string());
                continue;
            }
        };
        transport = false;
        let script_rel = env.layout.script(id);
        std::fs::write(env.layout.abs(&script_rel), &script)?;
        entry.script_path = Some(script_rel);
        match verify_script(&script, &env.config.sandbox) {
            Ok(run) => {
                for ext in &env.config.sandbox.image_extensions {
                    let _ = std::fs::remove_file(env.layout.abs(&env.layout.image(id, &ext.to_ascii_lowercase())));
                }
                let image_rel = env.layout.image(id, &run.image_extension());
                std::fs::copy(run.image_path(), env.layout.abs(&image_rel))?;
                entry.image_path = Some(image_rel);
                entry.status = JobStatus::Verified;
                entry.last_error = None;
                emit(entry);
                return Ok(false);
            }
            Err(e) => {
                log::debug!("{id}: script attempt {attempt} failed: {e}");
                entry.last_error = Some(e.to_string());
            }
        }
    }
    entry.status = JobStatus::Skipped;
    emit(entry);
    Ok(transport)
}

/// Processes every seed under `root`, writing artifacts and
/// `manifest.jsonl`.
///
/// Entries already verified with their files in place are kept as they
/// are and cost no requests. Failures are recorded per entry; the batch is
/// never aborted by one job.
pub fn run_pipeline(
    seeds: &[Seed],
    client: &dyn LlmClient,
    root: &Path,
    config: &PipelineConfig,
) -> Result<PipelineOutcome, PipelineError> {
    check_inputs(seeds, root, config)?;
    for sub in ["labels", "scripts", "images"] {
        std::fs::create_dir_all(root.join(sub))
            .map_err(|e| PipelineError::ConfigInvalid(format!("cannot create {}: {e}", root.join(sub).display())))?;
    }
    let existing =
        SimManifest::load(root).map_err(|e| PipelineError::ConfigInvalid(format!("existing manifest: {e}")))?;

    let mut state: BTreeMap<String, ManifestEntry> =
        existing.entries.iter().map(|e| (e.id.clone(), e.clone())).collect();
    let mut jobs = Vec::new();
    let mut reused = 0;
    for seed in seeds {
        let previous = state.get(&seed.id).cloned();
        if previous.as_ref().is_some_and(|e| e.artifacts_exist(root)) {
            reused += 1;
        } else {
            jobs.push(Job { seed, previous });
        }
    }

    let counting = Counting { inner: client, calls: AtomicUsize::new(0) };
    let layout = Layout { root: root.to_path_buf() };
    let env = JobEnv {
        client: &counting,
        layout: &layout,
        config,
        data: PromptTemplate::data(),
        image: PromptTemplate::image(),
    };
    let processed = jobs.len();
    let transport_failures = AtomicUsize::new(0);
    let next = AtomicUsize::new(0);
    let mut write_error: Option<std::io::Error> = None;

    thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<Result<ManifestEntry, std::io::Error>>();
        for _ in 0..config.concurrency.min(jobs.len()) {
            let tx = tx.clone();
            let (jobs, env, next, transport_failures) = (&jobs, &env, &next, &transport_failures);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let job = Job { seed: job.seed, previous: job.previous.clone() };
                let emit = |e: ManifestEntry| {
                    let _ = tx.send(Ok(e));
                };
                match run_job(job, env, &emit) {
                    Ok(true) => {
                        transport_failures.fetch_add(1, Ordering::SeqCst);
                    }
                    Ok(false) => {}
                    Err(e) => {
                        let _ = tx.send(Err(e));
                    }
                }
            });
        }
        drop(tx);

        // single writer: every update rewrites the manifest in id order
        for msg in rx {
            match msg {
                Ok(entry) => {
                    state.insert(entry.id.clone(), entry);
                    if let Err(e) = SimManifest::from_map(&state).store(root) {
                        write_error.get_or_insert(e);
                    }
                }
                Err(e) => {
                    write_error.get_or_insert(e);
                }
            }
        }
    });

    if let Some(e) = write_error {
        return Err(PipelineError::Io(e));
    }
    let manifest = SimManifest::from_map(&state);
    write_atomic(&root.join(crate::manifest::MANIFEST_FILE), manifest.to_jsonl().as_bytes())?;
    Ok(PipelineOutcome {
        manifest,
        llm_calls: counting.calls.load(Ordering::SeqCst),
        reused,
        transport_failures: transport_failures.into_inner(),
        processed,
    })
}
