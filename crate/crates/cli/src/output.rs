//! Report writing. Output files are listed in the run manifest in write order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::common::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "run.json";

pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

#[derive(Serialize)]
struct RunManifest<'a, A: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    args: &'a A,
    outputs: &'a [String],
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::Input(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Path for a new output file, recorded in the manifest.
    pub fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.root.join(name)
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> CliResult {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path)?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
    }

    /// CSV from a header and pre-formatted records.
    pub fn write_table(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> CliResult {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> CliResult {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
    }

    /// Invocation record without timestamps or host details, so reruns are identical.
    pub fn write_manifest<A: Serialize>(&mut self, command: &str, seed: u64, args: &A) -> CliResult {
        let outputs = self.written.clone();
        self.write_json(
            MANIFEST_FILE,
            &RunManifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command,
                seed,
                args,
                outputs: &outputs,
            },
        )
    }
}

/// Formats an optional value for a CSV cell; `None` stays empty.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
