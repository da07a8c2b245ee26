//! Report files, checks and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::spec::ExperimentSpec;

/// A pass/fail check attached to a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Files written by one run. Dropping it without [`Outputs::keep`] deletes them.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
    keep: bool,
}

impl Outputs {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::File {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            keep: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| CliError::File {
            path: path.display().to_string(),
            source,
        })?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    /// Render through a `Write`-based emitter.
    pub fn write_with(
        &mut self,
        name: &str,
        emit: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> CliResult<()> {
        let mut buf = Vec::new();
        emit(&mut buf)?;
        self.write(name, buf)
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = self.written.clone();
        names.sort();
        names
    }

    pub fn keep(mut self) -> Vec<String> {
        self.keep = true;
        self.names()
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.keep {
            for name in &self.written {
                let _ = fs::remove_file(self.dir.join(name));
            }
        }
    }
}

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub poisperc_cli: String,
    pub poisperc_core: String,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            poisperc_cli: env!("CARGO_PKG_VERSION").to_string(),
            poisperc_core: poisperc_core::VERSION.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: ExperimentSpec,
    pub versions: Versions,
    /// Seconds since the Unix epoch at start.
    pub started_unix: u64,
    pub wall_time_seconds: f64,
    /// Report files, sorted, excluding the manifest itself.
    pub outputs: Vec<String>,
    pub checks: Vec<Check>,
    pub all_checks_passed: bool,
}
