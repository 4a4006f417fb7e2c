//! Run manifest: config echo, seeds and a content hash for every output.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::experiments::{Artifact, StudyRun};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeedEntry {
    pub label: String,
    pub index: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub study: String,
    pub master_seed: u64,
    /// Top-level streams, each `derive_seed(master_seed, label, index)`.
    pub seeds: Vec<SeedEntry>,
    /// The parsed config serialized back to TOML; running it reproduces
    /// every output.
    pub config: String,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_entry(a: &Artifact) -> FileEntry {
    FileEntry { name: a.name.clone(), sha256: sha256_hex(a.contents.as_bytes()), bytes: a.contents.len() }
}

pub fn build_manifest(cfg: &RunConfig, run: &StudyRun) -> Manifest {
    Manifest {
        tool: "mixsel".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        study: cfg.study.name().into(),
        master_seed: cfg.seed,
        seeds: run
            .seeds
            .iter()
            .map(|(label, index)| SeedEntry {
                label: label.clone(),
                index: *index,
                seed: mixsel_core::rng::derive_seed(cfg.seed, label, *index),
            })
            .collect(),
        config: cfg.to_toml(),
        files: run.artifacts.iter().map(file_entry).collect(),
    }
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
