//! `manifest.json`: what ran, with which settings, and whether it passed.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Result;
use serde::Serialize;

use crate::commands::{all_pass, CheckOutcome};
use crate::config::ScenarioConfig;

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    /// The configuration with every default filled in.
    pub config: ScenarioConfig,
    pub seed: Option<u64>,
    pub threads: usize,
    /// Seconds since the Unix epoch at completion.
    pub finished_at: u64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
    pub checks: Vec<CheckOutcome>,
    pub pass: bool,
}

impl Manifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        command: &str,
        cfg: &ScenarioConfig,
        seed: Option<u64>,
        threads: usize,
        start: Instant,
        outputs: Vec<PathBuf>,
        checks: Vec<CheckOutcome>,
        out: &Path,
    ) -> Result<Manifest> {
        let outputs = outputs
            .iter()
            .map(|p| p.strip_prefix(out).unwrap_or(p).display().to_string())
            .collect();
        Ok(Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: cfg.resolved(),
            seed,
            threads,
            finished_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            outputs,
            pass: all_pass(&checks),
            checks,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}
