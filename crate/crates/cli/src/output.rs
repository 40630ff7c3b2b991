//! Artifact directory with a manifest of everything written.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::settings::Settings;

pub struct Output {
    dir: PathBuf,
    artifacts: Vec<(String, u64)>,
}

impl Output {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Output { dir: dir.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| ridgeline_io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| ridgeline_io(&path, e))?;
        self.record(name)?;
        Ok(path)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<PathBuf> {
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(ridgeline::Error::from)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Note a file produced by some other writer.
    pub fn record(&mut self, name: &str) -> CliResult<()> {
        let path = self.path(name);
        let bytes = fs::metadata(&path).map_err(|e| ridgeline_io(&path, e))?.len();
        self.artifacts.retain(|(n, _)| n != name);
        self.artifacts.push((name.to_string(), bytes));
        Ok(())
    }

    pub fn artifacts(&self) -> Vec<String> {
        self.artifacts.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Write `manifest.json`: the command, the effective settings and the
    /// artifact list. Nothing time- or host-dependent goes in.
    pub fn finish(mut self, command: &str, settings: &Settings) -> CliResult<Vec<String>> {
        let artifacts: Vec<_> = self.artifacts.iter().map(|(n, b)| json!({ "path": n, "bytes": b })).collect();
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "settings": settings,
            "artifacts": artifacts,
        });
        self.write_json("manifest.json", &manifest)?;
        Ok(self.artifacts())
    }
}

fn ridgeline_io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}
