//! The JSONL record of a simulation run.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Pending,
    LabelDone,
    Verified,
    Skipped,
}

impl JobStatus {
    pub fn is_final(self) -> bool {
        matches!(self, JobStatus::Verified | JobStatus::Skipped)
    }
}

/// One line of the manifest. Paths are relative to the output root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub sim_label_path: Option<String>,
    pub script_path: Option<String>,
    pub image_path: Option<String>,
    pub status: JobStatus,
    /// Script generations tried.
    pub attempts: u32,
    pub model_id: String,
    pub created_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_error: Option<String>,
}

impl ManifestEntry {
    /// True when the entry is verified and its three artifacts are present
    /// and non-empty under `root`.
    pub fn artifacts_exist(&self, root: &Path) -> bool {
        self.status == JobStatus::Verified
            && [&self.sim_label_path, &self.script_path, &self.image_path].iter().all(|p| {
                p.as_ref()
                    .and_then(|p| std::fs::metadata(root.join(p)).ok())
                    .is_some_and(|m| m.is_file() && m.len() > 0)
            })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub pending: usize,
    pub label_done: usize,
    pub verified: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimManifest {
    /// Sorted by id.
    pub entries: Vec<ManifestEntry>,
}

impl SimManifest {
    pub fn from_map(map: &BTreeMap<String, ManifestEntry>) -> Self {
        SimManifest { entries: map.values().cloned().collect() }
    }

    pub fn get(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn counts(&self) -> StatusCounts {
        let mut c = StatusCounts::default();
        for e in &self.entries {
            match e.status {
                JobStatus::Pending => c.pending += 1,
                JobStatus::LabelDone => c.label_done += 1,
                JobStatus::Verified => c.verified += 1,
                JobStatus::Skipped => c.skipped += 1,
            }
        }
        c
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, String> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?);
        }
        entries.sort_by(|a: &ManifestEntry, b| a.id.cmp(&b.id));
        Ok(SimManifest { entries })
    }

    /// Reads `<root>/manifest.jsonl`; a missing file is an empty manifest.
    pub fn load(root: &Path) -> Result<Self, String> {
        match std::fs::read_to_string(root.join(MANIFEST_FILE)) {
            Ok(text) => Self::parse_jsonl(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e.to_string()),
        }
    }

    /// Replaces `<root>/manifest.jsonl` atomically.
    pub fn store(&self, root: &Path) -> std::io::Result<()> {
        write_atomic(&root.join(MANIFEST_FILE), self.to_jsonl().as_bytes())
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, status: JobStatus) -> ManifestEntry {
        ManifestEntry {
            id: id.into(),
            sim_label_path: None,
            script_path: None,
            image_path: None,
            status,
            attempts: 0,
            model_id: "m".into(),
            created_at: "2024-01-01T00:00:00Z".into(),
            last_error: None,
        }
    }

    #[test]
    fn jsonl_round_trip_sorted() {
        let m = SimManifest { entries: vec![entry("b", JobStatus::Skipped), entry("a", JobStatus::Verified)] };
        let back = SimManifest::parse_jsonl(&m.to_jsonl()).unwrap();
        assert_eq!(back.entries[0].id, "a");
        assert_eq!(back.counts(), StatusCounts { verified: 1, skipped: 1, ..Default::default() });
        assert!(m.to_jsonl().contains(r#""status":"skipped""#));
    }

    #[test]
    fn status_order() {
        assert!(JobStatus::Pending < JobStatus::LabelDone && JobStatus::LabelDone < JobStatus::Verified);
    }
}
