use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use glosten_core::monte_carlo::format_f64;
use serde::{Deserialize, Serialize};

use crate::args::Command;
use crate::error::{CliError, CliResult};

/// Collects the files of one run inside its output directory.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// Writes `name` through a buffered writer and records it.
    pub fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> CliResult<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(CliError::io(&path))?;
        let mut out = BufWriter::new(file);
        body(&mut out)
            .and_then(|_| out.flush())
            .map_err(CliError::io(&path))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        self.write(name, |out| {
            serde_json::to_writer_pretty(&mut *out, value)?;
            writeln!(out)
        })
    }

    pub fn write_csv(&mut self, name: &str, table: &Table) -> CliResult<()> {
        self.write(name, |out| table.write(out))
    }
}

/// A CSV table with a fixed header row.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "{}", self.header.join(","))?;
        for row in &self.rows {
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Cell formatters: floats with 17 significant digits.
pub fn f(x: f64) -> String {
    format_f64(x)
}

pub fn i(x: impl ToString) -> String {
    x.to_string()
}

/// Everything needed to reproduce a run.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    /// The fully resolved invocation, defaults included.
    pub invocation: Command,
    /// Output files, relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub passed: Option<bool>,
    /// Informational; outputs do not depend on it.
    pub threads: usize,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn file_name(command: &Command) -> String {
        format!("{}.manifest.json", command.name())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}
