//! Artifact writer. Every CSV starts with `# qpm <version> config=<hash>`;
//! JSON documents carry the same two values as top-level fields.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::{Format, RunConfig};
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct Output {
    dir: PathBuf,
    format: Format,
    hash: String,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn create(cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = cfg.output.dir.clone();
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut out = Output {
            dir,
            format: cfg.output.format,
            hash: cfg.hash(),
            written: Vec::new(),
        };
        out.write_raw("config.toml", cfg.to_toml().as_bytes())?;
        Ok(out)
    }

    pub fn header(&self) -> String {
        format!("# qpm {VERSION} config={}", self.hash)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn write_raw(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Rows of scalars under named columns.
    pub fn table(&mut self, stem: &str, columns: &[&str], rows: Vec<Vec<Value>>) -> Result<PathBuf, CliError> {
        match self.format {
            Format::Csv => {
                let mut buf = format!("{}\n", self.header()).into_bytes();
                {
                    let mut w = csv::Writer::from_writer(&mut buf);
                    w.write_record(columns).map_err(qpm_core::Error::from)?;
                    for row in &rows {
                        w.write_record(row.iter().map(cell)).map_err(qpm_core::Error::from)?;
                    }
                    w.flush().map_err(|e| CliError::io(self.dir.join(stem), e))?;
                }
                self.write_raw(&format!("{stem}.csv"), &buf)
            }
            Format::Json => {
                let doc = json!({ "columns": columns, "rows": rows });
                self.json(stem, doc)
            }
        }
    }

    /// An artifact with separate CSV and JSON writers from the core crate.
    pub fn document(
        &mut self,
        stem: &str,
        csv: impl FnOnce(&mut Vec<u8>) -> qpm_core::Result<()>,
        json: impl FnOnce(&mut Vec<u8>) -> qpm_core::Result<()>,
    ) -> Result<PathBuf, CliError> {
        match self.format {
            Format::Csv => {
                let mut buf = format!("{}\n", self.header()).into_bytes();
                csv(&mut buf)?;
                self.write_raw(&format!("{stem}.csv"), &buf)
            }
            Format::Json => {
                let mut buf = Vec::new();
                json(&mut buf)?;
                let doc: Value = serde_json::from_slice(&buf).map_err(qpm_core::Error::from)?;
                self.json(stem, doc)
            }
        }
    }

    fn json(&mut self, stem: &str, data: Value) -> Result<PathBuf, CliError> {
        let doc = json!({ "qpm_version": VERSION, "config_hash": self.hash, "data": data });
        let mut buf = serde_json::to_vec_pretty(&doc).map_err(qpm_core::Error::from)?;
        buf.push(b'\n');
        self.write_raw(&format!("{stem}.json"), &buf)
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Reads a file, mapping failures to the I/O exit code.
pub fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}
