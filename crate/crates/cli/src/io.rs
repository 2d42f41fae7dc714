//! File plumbing shared by the commands: CSV input, output files, manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Wall clock, or `SOURCE_DATE_EPOCH` when set for reproducible manifests.
fn now_unix() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Header plus string cells of a CSV file.
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub digest: String,
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let digest = sha256_hex(&bytes);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::input(format!("{}: bad header: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("{}: line {}: {e}", path.display(), i + 2)))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(Table { headers, rows, digest })
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Output directory that records a digest of everything written to it.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<FileDigest>,
    started_unix: u64,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::other(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            started_unix: now_unix(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::other(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::other(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `header` then `rows` as CSV.
    pub fn write_csv<R, S>(&mut self, name: &str, header: &[&str], rows: R) -> Result<(), CliError>
    where
        R: IntoIterator<Item = Vec<S>>,
        S: AsRef<[u8]>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let ser = |e: csv::Error| CliError::other(format!("cannot format {name}: {e}"));
        w.write_record(header).map_err(ser)?;
        for row in rows {
            w.write_record(&row).map_err(ser)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::other(format!("cannot format {name}: {e}")))?;
        self.write(name, &bytes)
    }

    /// Writes `manifest.json` describing this invocation. The timestamps are
    /// the only fields that differ between identical reruns.
    pub fn finish<P: Serialize>(
        mut self,
        command: &str,
        seed: u64,
        parameters: &P,
        inputs: Vec<FileDigest>,
    ) -> Result<(), CliError> {
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            parameters,
            inputs,
            outputs: std::mem::take(&mut self.written),
            started_unix: self.started_unix,
            finished_unix: now_unix(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::other(format!("cannot serialize manifest: {e}")))?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, text).map_err(|e| CliError::other(format!("cannot write {}: {e}", path.display())))
    }
}

#[derive(Serialize)]
struct Manifest<'a, P: Serialize> {
    schema_version: u32,
    command: String,
    tool_version: String,
    seed: u64,
    parameters: &'a P,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    started_unix: u64,
    finished_unix: u64,
}

/// Shortest text that parses back to the same value.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Parses `"5,8"` into numbers.
pub fn parse_number_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|part| {
            let part = part.trim();
            part.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("{part:?} is not a finite number"))
        })
        .collect()
}
