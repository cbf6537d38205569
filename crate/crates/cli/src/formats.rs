//! File format detection and loading.

use std::path::Path;

use anyhow::{anyhow, Context};
use chartrel::triplet::{parse_str, to_str};
use chartrel::{parse_lct, LctTable, NTupleSet, StrFormat, TripletSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Lct,
    StrText,
    StrJsonl,
}

impl FileFormat {
    pub fn from_path(path: &Path) -> Option<FileFormat> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "csv" | "lct" => Some(FileFormat::Lct),
            "str" | "txt" => Some(FileFormat::StrText),
            "jsonl" => Some(FileFormat::StrJsonl),
            _ => None,
        }
    }
}

/// A loaded file: either a table or a record set.
#[derive(Debug, Clone)]
pub enum Loaded {
    Table(LctTable),
    Records(NTupleSet),
}

impl Loaded {
    pub fn into_triplets(self) -> anyhow::Result<TripletSet> {
        match self {
            Loaded::Table(t) => Ok(to_str(&t)),
            Loaded::Records(r) => TripletSet::try_from(r).map_err(|e| anyhow!("{e}")),
        }
    }
}

pub fn load(path: &Path) -> anyhow::Result<Loaded> {
    let format = FileFormat::from_path(path).ok_or_else(|| anyhow!("{}: unsupported extension", path.display()))?;
    let text = std::fs::read_to_string(path).with_context(|| format!("{}: cannot read", path.display()))?;
    let loaded = match format {
        FileFormat::Lct => parse_lct(&text).map(Loaded::Table).map_err(|e| anyhow!("{e}")),
        FileFormat::StrText => parse_str(&text, StrFormat::Text).map(Loaded::Records).map_err(|e| anyhow!("{e}")),
        FileFormat::StrJsonl => parse_str(&text, StrFormat::Jsonl).map(Loaded::Records).map_err(|e| anyhow!("{e}")),
    };
    loaded.map_err(|e| anyhow!("{}: {e}", path.display()))
}

pub fn load_triplets(path: &Path) -> anyhow::Result<TripletSet> {
    load(path)?.into_triplets().map_err(|e| anyhow!("{}: {e}", path.display()))
}
