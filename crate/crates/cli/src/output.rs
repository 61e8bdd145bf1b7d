use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use starkgate::nalgebra::DMatrix;
use starkgate::C64;

use crate::CliError;

/// Provenance attached to every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub command: String,
    pub scenario: String,
    pub config_sha256: String,
    pub catalog_sha256: String,
    pub version: String,
}

pub struct OutDir {
    dir: PathBuf,
    meta: Metadata,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(dir: &Path, meta: Metadata) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            meta,
            written: Vec::new(),
        })
    }

    fn open(&mut self, name: &str) -> Result<(PathBuf, BufWriter<fs::File>), CliError> {
        let path = self.dir.join(name);
        let f = fs::File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path.clone());
        Ok((path, BufWriter::new(f)))
    }

    /// CSV with the metadata as leading `#` comment lines.
    pub fn csv(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
        let meta = self.meta.clone();
        let (path, mut w) = self.open(name)?;
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
        writeln!(w, "# command={} scenario={}", meta.command, meta.scenario).map_err(io)?;
        writeln!(w, "# config_sha256={}", meta.config_sha256).map_err(io)?;
        writeln!(w, "# catalog_sha256={}", meta.catalog_sha256).map_err(io)?;
        writeln!(w, "# version={}", meta.version).map_err(io)?;
        body(&mut w).map_err(io)?;
        w.flush().map_err(io)
    }

    /// JSON object `{"metadata": ..., <fields of value>}`.
    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut doc = json!({ "metadata": self.meta });
        match serde_json::to_value(value).map_err(|e| CliError::Io(e.to_string()))? {
            Value::Object(m) => doc.as_object_mut().expect("object").extend(m),
            other => {
                doc["result"] = other;
            }
        }
        let (path, mut w) = self.open(name)?;
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
        serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(w).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Complex matrix as separate real and imaginary row-major arrays.
pub fn matrix_json(m: &DMatrix<C64>) -> Value {
    let rows = |f: fn(&C64) -> f64| -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
    };
    json!({ "re": rows(|c| c.re), "im": rows(|c| c.im) })
}
