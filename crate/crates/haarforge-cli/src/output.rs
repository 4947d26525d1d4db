use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::ValueEnum;
use haarforge::moment_lab::ExperimentRecord;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Both,
}

/// Provenance of one invocation. Everything except the timestamps and
/// output paths determines the numeric outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<PathBuf>,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

pub fn config_hash(canonical: &Value) -> String {
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    format!("{digest:x}")
}

/// A record flattened into one output row tagged with hash and seed.
pub fn tag_row(rec: &ExperimentRecord, hash: &str, seed: u64) -> Value {
    let mut v = serde_json::to_value(rec).expect("records serialize");
    if let Some(obj) = v.as_object_mut() {
        obj.insert("config_hash".into(), Value::String(hash.into()));
        obj.insert("seed".into(), seed.into());
    }
    v
}

#[derive(Serialize)]
struct CsvRow<'a> {
    experiment: &'a str,
    metric: &'a str,
    value: f64,
    std_error: f64,
    n_samples: usize,
    config_hash: &'a str,
    seed: u64,
    config: String,
}

/// Writes records.jsonl and/or summary.csv into `dir`; returns the written paths.
pub fn write_outputs(
    dir: &Path,
    format: Format,
    records: &[ExperimentRecord],
    hash: &str,
    seed: u64,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if matches!(format, Format::Json | Format::Both) {
        let path = dir.join("records.jsonl");
        let mut w = BufWriter::new(File::create(&path)?);
        for r in records {
            writeln!(w, "{}", tag_row(r, hash, seed))?;
        }
        w.flush()?;
        written.push(path);
    }
    if matches!(format, Format::Csv | Format::Both) {
        let path = dir.join("summary.csv");
        let mut w = csv::Writer::from_path(&path)?;
        for r in records {
            w.serialize(CsvRow {
                experiment: &r.experiment,
                metric: &r.metric,
                value: r.value,
                std_error: r.std_error,
                n_samples: r.n_samples,
                config_hash: hash,
                seed,
                config: r.config.to_string(),
            })?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_json(path: &Path, v: &impl Serialize) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, v).map_err(|e| CliError::Io(e.into()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
