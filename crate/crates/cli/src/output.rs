use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::experiments::Results;

pub const RESULTS_JSON: &str = "results.json";
pub const RESULTS_CSV: &str = "results.csv";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    /// The config with every default filled in.
    pub config: ExperimentConfig,
    pub versions: Versions,
    pub worker_threads: usize,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub jsqd_cli: String,
    pub jsqd_core: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn results_json(results: &Results) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(results)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn results_csv(results: &Results) -> Result<Vec<u8>> {
    let (header, rows) = results.summary_table();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Write results, summary and manifest into the configured output directory.
pub fn write_artifacts(
    cfg: &ExperimentConfig,
    config_bytes: &[u8],
    results: &Results,
) -> Result<Manifest> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (name, bytes) in [
        (RESULTS_JSON, results_json(results)?),
        (RESULTS_CSV, results_csv(results)?),
    ] {
        fs::write(dir.join(name), &bytes)?;
        files.push(FileEntry {
            name: name.to_string(),
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = Manifest {
        config_sha256: sha256_hex(config_bytes),
        config: cfg.clone(),
        versions: Versions {
            jsqd_cli: env!("CARGO_PKG_VERSION").to_string(),
            jsqd_core: jsqd_core::VERSION.to_string(),
        },
        worker_threads: rayon::current_num_threads(),
        files,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}
