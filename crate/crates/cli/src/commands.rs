use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use chartrel::qa::{parse_jsonl, score_batch, QaSummary};
use chartrel::scrm::render_table;
use chartrel::triplet::{from_str, serialize_str};
use chartrel::{serialize_lct, MatchMode, Scorer, ScrmReport, StrFormat, ToleranceLevel, TripletSet};
use chartrel_sim::{run_pipeline, PipelineError, Seed, SimConfig};

use crate::formats::{load, load_triplets, FileFormat, Loaded};
use crate::{CliError, Target};

fn output_name(input: &Path, to: Target) -> PathBuf {
    let stem = input.file_stem().unwrap_or_default();
    let ext = match to {
        Target::StrText => "str",
        Target::StrJsonl => "jsonl",
        Target::Lct => "csv",
    };
    PathBuf::from(stem).with_extension(ext)
}

fn convert_one(input: &Path, to: Target, out_dir: Option<&Path>) -> anyhow::Result<PathBuf> {
    let loaded = load(input)?;
    let text = match (to, loaded) {
        (Target::Lct, Loaded::Table(t)) => serialize_lct(&t),
        (Target::Lct, Loaded::Records(r)) => {
            let set = TripletSet::try_from(r).map_err(|e| anyhow!("{}: {e}", input.display()))?;
            serialize_lct(&from_str(&set).map_err(|e| anyhow!("{}: {e}", input.display()))?)
        }
        (Target::StrText | Target::StrJsonl, loaded) => {
            let format = if to == Target::StrText { StrFormat::Text } else { StrFormat::Jsonl };
            match loaded {
                Loaded::Table(t) => serialize_str(&chartrel::triplet::to_str(&t), format),
                Loaded::Records(r) => serialize_str(&r, format),
            }
        }
    };
    let dir = match out_dir {
        Some(d) => d.to_path_buf(),
        None => input.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let dest = dir.join(output_name(input, to));
    if dest.exists() && dest.canonicalize().ok() == input.canonicalize().ok() {
        return Err(anyhow!("{}: output would overwrite the input; pass --out", input.display()));
    }
    std::fs::write(&dest, text).map_err(|e| anyhow!("{}: cannot write: {e}", dest.display()))?;
    Ok(dest)
}

/// Converts each input, reporting failures per file. Fails with a data error
/// if any file failed.
pub fn convert(inputs: &[PathBuf], to: Target, out_dir: Option<&Path>) -> Result<(), CliError> {
    if let Some(d) = out_dir {
        std::fs::create_dir_all(d).map_err(|e| CliError::config(anyhow!("cannot create {}: {e}", d.display())))?;
    }
    let mut failed = 0;
    for input in inputs {
        match convert_one(input, to, out_dir) {
            Ok(dest) => println!("{} -> {}", input.display(), dest.display()),
            Err(e) => {
                eprintln!("error: {e:#}");
                failed += 1;
            }
        }
    }
    if failed > 0 {
        return Err(CliError::data(anyhow!("{failed} of {} file(s) failed to convert", inputs.len())));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub tolerances: Vec<ToleranceLevel>,
    pub mode: MatchMode,
    pub thresholds: Vec<f64>,
    pub strict_pairing: bool,
}

impl EvalOptions {
    pub fn parse(tol: &str, mode: &str, thresholds: &str, strict_pairing: bool) -> Result<Self, CliError> {
        let tolerances = ToleranceLevel::parse_list(tol).map_err(CliError::config)?;
        let mode = mode.parse::<MatchMode>().map_err(|e| CliError::config(anyhow!(e)))?;
        let thresholds = thresholds
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::config(anyhow!("invalid threshold {t:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EvalOptions { tolerances, mode, thresholds, strict_pairing })
    }
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            tolerances: ToleranceLevel::standard(),
            mode: MatchMode::Matched,
            thresholds: chartrel::scrm::DEFAULT_THRESHOLDS.to_vec(),
            strict_pairing: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: ScrmReport,
    /// The plain-text table printed by the command.
    pub table: String,
    /// Stems present on only one side.
    pub pred_only: Vec<String>,
    pub gt_only: Vec<String>,
}

fn table_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| CliError::config(anyhow!("cannot read {}: {e}", dir.display())))?;
    let mut files = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(CliError::config)?.path();
        if !path.is_file() || FileFormat::from_path(&path).is_none() {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        if let Some(other) = files.insert(stem.clone(), path.clone()) {
            return Err(CliError::data(anyhow!("{} and {} share the stem {stem:?}", other.display(), path.display())));
        }
    }
    Ok(files)
}

/// Pairs prediction and ground-truth files by stem and scores them.
///
/// A prediction that fails to parse scores as an empty prediction. Ground
/// truth must parse.
pub fn eval(pred_dir: &Path, gt_dir: &Path, opts: &EvalOptions) -> Result<EvalOutcome, CliError> {
    let preds = table_files(pred_dir)?;
    let gts = table_files(gt_dir)?;
    let pred_only: Vec<String> = preds.keys().filter(|k| !gts.contains_key(*k)).cloned().collect();
    let gt_only: Vec<String> = gts.keys().filter(|k| !preds.contains_key(*k)).cloned().collect();
    if !pred_only.is_empty() {
        eprintln!("unpaired predictions (ignored): {}", pred_only.join(", "));
    }
    if !gt_only.is_empty() {
        let fate = if opts.strict_pairing { "scored as IoU 0" } else { "skipped" };
        eprintln!("unpaired ground truth ({fate}): {}", gt_only.join(", "));
    }

    let mut ids = Vec::new();
    let mut pairs = Vec::new();
    for (stem, gt_path) in &gts {
        let gt = load_triplets(gt_path).map_err(CliError::data)?;
        let pred = match preds.get(stem) {
            Some(p) => load_triplets(p).unwrap_or_else(|e| {
                eprintln!("warning: {e:#}; scored as an empty prediction");
                TripletSet::default()
            }),
            None if opts.strict_pairing => TripletSet::default(),
            None => continue,
        };
        ids.push(stem.clone());
        pairs.push((pred, gt));
    }

    let report = Scorer::new(opts.mode)
        .dataset_report(&pairs, &opts.tolerances, &opts.thresholds)
        .map_err(|e| CliError::data(anyhow!("{}: {e}", gt_dir.display())))?
        .with_image_ids(ids)
        .map_err(CliError::data)?;
    let table = render_table(&report);
    Ok(EvalOutcome { report, table, pred_only, gt_only })
}

pub fn qa(path: &Path, margin: f64) -> Result<QaSummary, CliError> {
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(CliError::config(anyhow!("margin must be a non-negative number")));
    }
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::config(anyhow!("cannot read {}: {e}", path.display())))?;
    let records = parse_jsonl(&text).map_err(|e| CliError::data(anyhow!("{}: {e}", path.display())))?;
    score_batch(&records, margin).map_err(|e| CliError::data(anyhow!("{}: {e}", path.display())))
}

fn read_seeds(dir: &Path) -> Result<Vec<Seed>, CliError> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| CliError::config(anyhow!("cannot read {}: {e}", dir.display())))?;
    let mut seeds = Vec::new();
    for entry in entries {
        let path = entry.map_err(CliError::config)?.path();
        if !path.is_file() || FileFormat::from_path(&path) != Some(FileFormat::Lct) {
            continue;
        }
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let label = std::fs::read_to_string(&path).map_err(|e| CliError::data(anyhow!("{}: {e}", path.display())))?;
        seeds.push(Seed::new(id, label));
    }
    seeds.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(seeds)
}

/// Runs the simulation pipeline. Skipped entries are reported but do not
/// fail the command; a run where every job failed on transport does.
pub fn simulate(seeds_dir: &Path, out: &Path, config_path: &Path) -> Result<(), CliError> {
    let config = SimConfig::load(config_path).map_err(CliError::config)?;
    let client = config.client().map_err(CliError::config)?;
    let seeds = read_seeds(seeds_dir)?;
    let outcome = run_pipeline(&seeds, client.as_ref(), out, &config.pipeline_config()).map_err(|e| match e {
        PipelineError::NoSeeds => CliError::data(anyhow!("no .csv or .lct seeds in {}", seeds_dir.display())),
        PipelineError::ConfigInvalid(_) | PipelineError::Io(_) => CliError::config(e),
    })?;

    let counts = outcome.manifest.counts();
    println!(
        "verified: {}  skipped: {}  reused: {}  llm_calls: {}",
        counts.verified, counts.skipped, outcome.reused, outcome.llm_calls
    );
    for e in outcome.manifest.entries.iter().filter(|e| e.status == chartrel_sim::JobStatus::Skipped) {
        println!("skipped {}: {}", e.id, e.last_error.as_deref().unwrap_or("unknown error"));
    }
    println!("manifest: {}", out.join(chartrel_sim::manifest::MANIFEST_FILE).display());
    if outcome.processed > 0 && outcome.transport_failures == outcome.processed {
        return Err(CliError::data(anyhow!("every job failed to reach the LLM endpoint")));
    }
    Ok(())
}
