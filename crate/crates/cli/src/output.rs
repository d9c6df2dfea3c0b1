//! Output directory handling and the summary report.
//!
//! Every file a run emits is recorded and listed in `summary.json`, so there
//! are no orphan outputs.

use serde_json::{json, Map, Value};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliResult;

pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        fs::write(self.root.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Write `summary.json` with the run metadata, the command-specific
    /// report, and the list of every emitted file.
    pub fn finish(
        mut self,
        command: &str,
        seed: u64,
        report: Map<String, Value>,
    ) -> CliResult<PathBuf> {
        let summary = json!({
            "command": command,
            "status": "ok",
            "seed": seed,
            "outputs": self.files,
            "report": Value::Object(report),
        });
        let path = self.root.join("summary.json");
        fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
        self.files.push("summary.json".into());
        Ok(path)
    }
}

impl From<serde_json::Error> for crate::error::CliError {
    fn from(e: serde_json::Error) -> Self {
        crate::error::CliError::Io(std::io::Error::other(e))
    }
}

/// Best-effort error summary so failed runs are machine-readable too.
pub fn write_error_summary(root: &Path, command: &str, category: &str, message: &str) {
    if fs::create_dir_all(root).is_err() {
        return;
    }
    let summary = json!({
        "command": command,
        "status": "error",
        "error_category": category,
        "message": message,
    });
    if let Ok(text) = serde_json::to_string_pretty(&summary) {
        let _ = fs::write(root.join("summary.json"), text);
    }
}
