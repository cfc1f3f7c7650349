use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::error::Result;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

/// Collects output files in a staging directory next to the target and moves
/// them into place only once the whole experiment has succeeded. Dropping an
/// uncommitted staging area deletes it, and the target too if it was created
/// for this run and is still empty.
#[derive(Debug)]
pub struct Staging {
    target: PathBuf,
    dir: PathBuf,
    files: Vec<FileRecord>,
    created_target: bool,
    committed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

impl Staging {
    pub fn new(target: &Path) -> Result<Staging> {
        let created_target = !target.exists();
        fs::create_dir_all(target)?;
        let dir = target.join(format!(".staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir)?;
        Ok(Staging { target: target.to_path_buf(), dir, files: Vec::new(), created_target, committed: false })
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let mut f = fs::File::create(self.dir.join(name))?;
        f.write_all(contents)?;
        f.sync_all()?;
        self.files.push(FileRecord {
            name: name.to_string(),
            bytes: contents.len(),
            sha256: hex(&Sha256::digest(contents)),
        });
        Ok(())
    }

    pub fn write_with(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut buf = serde_json::to_vec_pretty(value)?;
        buf.push(b'\n');
        self.write(name, &buf)
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    /// Renames every staged file into the target directory.
    pub fn commit(mut self) -> Result<Vec<FileRecord>> {
        for f in &self.files {
            fs::rename(self.dir.join(&f.name), self.target.join(&f.name))?;
        }
        fs::remove_dir(&self.dir)?;
        self.committed = true;
        Ok(std::mem::take(&mut self.files))
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
            if self.created_target {
                let _ = fs::remove_dir(&self.target);
            }
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Largest values of the numerical guards over everything an experiment ran.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct GuardSummary {
    pub max_guard_population: f64,
    pub max_unitarity_drift: f64,
    pub max_phase_per_step: f64,
    pub propagation_steps: usize,
}

impl GuardSummary {
    pub fn merge(&mut self, other: &GuardSummary) {
        self.max_guard_population = self.max_guard_population.max(other.max_guard_population);
        self.max_unitarity_drift = self.max_unitarity_drift.max(other.max_unitarity_drift);
        self.max_phase_per_step = self.max_phase_per_step.max(other.max_phase_per_step);
        self.propagation_steps += other.propagation_steps;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub wall_time_seconds: f64,
    pub guards: GuardSummary,
    pub warnings: Vec<String>,
    pub files: Vec<FileRecord>,
}
