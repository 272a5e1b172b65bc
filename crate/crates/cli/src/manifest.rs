//! Run manifests: every output file is accompanied by a record of the
//! command that produced it, so re-running the manifest's command
//! reproduces the outputs bit for bit (wall-clock duration lives only
//! here, never in the outputs themselves).

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use fbexp_core::schemes::SchemeConfig;

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub version: String,
    /// Resolved config in the flat key/value format, when the command has one.
    pub config: Option<String>,
    /// Pilot-resolved retransmission-trigger probability, when applicable.
    pub resolved_gamma: Option<f64>,
    pub outputs: Vec<String>,
    pub duration_ms: u128,
}

pub fn write(
    base: &Path,
    argv: &[String],
    cfg: Option<&SchemeConfig>,
    resolved_gamma: Option<f64>,
    outputs: &[&PathBuf],
    started: Instant,
) -> Result<()> {
    let manifest = RunManifest {
        command: argv.to_vec(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.map(|c| c.to_kv_text()),
        resolved_gamma,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        duration_ms: started.elapsed().as_millis(),
    };
    let path = manifest_path(base);
    std::fs::write(path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

pub fn manifest_path(base: &Path) -> PathBuf {
    let mut name = base.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    base.with_file_name(name)
}
