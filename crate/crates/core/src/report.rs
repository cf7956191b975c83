//! Monte-Carlo report records and the CSV / JSON-lines writers.
//!
//! Every output file starts with a header carrying the resolved config, a
//! content hash of that config and a timestamp. The timestamp is confined to
//! one designated line so that bodies of replayed runs compare byte for byte.

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

/// One Monte-Carlo comparison `lhs ≈ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCReport {
    pub op: String,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub se_lhs: f64,
    pub se_rhs: f64,
    pub n_samples: usize,
    /// Samples dropped because the integrator rejected them.
    pub failed_samples: usize,
    pub seed: u64,
    pub pass: bool,
}

impl MCReport {
    /// `pass ⇔ |lhs − rhs| ≤ 3(se_lhs + se_rhs)`.
    pub fn new(
        op: impl Into<String>,
        lhs: Complex64,
        se_lhs: f64,
        rhs: Complex64,
        se_rhs: f64,
        n_samples: usize,
        seed: u64,
    ) -> Self {
        let pass = (lhs - rhs).norm() <= 3.0 * (se_lhs + se_rhs);
        Self { op: op.into(), lhs, rhs, se_lhs, se_rhs, n_samples, failed_samples: 0, seed, pass }
    }

    pub fn with_failures(mut self, failed: usize) -> Self {
        self.failed_samples = failed;
        self
    }

    /// `|lhs − rhs| / (se_lhs + se_rhs)`, zero when both sides are exact
    /// and equal.
    pub fn z_score(&self) -> f64 {
        let d = (self.lhs - self.rhs).norm();
        let se = self.se_lhs + self.se_rhs;
        if d == 0.0 {
            0.0
        } else {
            d / se
        }
    }
}

/// Sample mean of complex values and its standard error
/// `sqrt(se_re² + se_im²)`.
pub fn complex_mean_se(values: &[Complex64]) -> (Complex64, f64) {
    let re: Vec<f64> = values.iter().map(|z| z.re).collect();
    let im: Vec<f64> = values.iter().map(|z| z.im).collect();
    let (mr, sr) = crate::stats::mean_se(&re);
    let (mi, si) = crate::stats::mean_se(&im);
    (Complex64::new(mr, mi), sr.hypot(si))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

/// Provenance header for an output file.
#[derive(Debug, Clone)]
pub struct Header {
    pub command: String,
    pub config: Value,
}

impl Header {
    pub fn new(command: impl Into<String>, config: &impl Serialize) -> Result<Self> {
        Ok(Self { command: command.into(), config: serde_json::to_value(config)? })
    }

    pub fn config_json(&self) -> String {
        self.config.to_string()
    }

    /// Git blob hash, with SHA-256, of the compact config JSON.
    pub fn config_hash(&self) -> String {
        content_hash(self.config_json().as_bytes())
    }
}

/// SHA-256 of `"blob {len}\0" ++ bytes`, lowercase hex.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Prefix of the only header line that varies between replays.
pub const TIMESTAMP_PREFIX: &str = "# generated-unix: ";

/// Writes `records` as CSV (comment header, header row, one row per record)
/// or as JSON lines (one header object, then one object per record).
///
/// CSV columns are the keys of the first record in their serialized order;
/// nested values are written as compact JSON.
pub fn write_records<W: Write + ?Sized>(out: &mut W, format: Format, header: &Header, records: &[Value]) -> Result<()> {
    match format {
        Format::Json => {
            let head = serde_json::json!({
                "header": {
                    "command": header.command,
                    "config": header.config,
                    "config_hash": header.config_hash(),
                    "generated_unix": timestamp(),
                }
            });
            writeln!(out, "{head}")?;
            for r in records {
                writeln!(out, "{r}")?;
            }
        }
        Format::Csv => {
            writeln!(out, "# command: {}", header.command)?;
            writeln!(out, "# config: {}", header.config_json())?;
            writeln!(out, "# config-hash: {}", header.config_hash())?;
            writeln!(out, "{TIMESTAMP_PREFIX}{}", timestamp())?;
            let columns = csv_columns(records);
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            w.write_record(&columns).map_err(csv_err)?;
            for r in records {
                let row: Vec<String> = columns.iter().map(|c| csv_cell(r.get(c))).collect();
                w.write_record(&row).map_err(csv_err)?;
            }
            out.write_all(&w.into_inner().map_err(|e| LabError::Io(e.into_error()))?)?;
        }
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> LabError {
    LabError::Io(std::io::Error::other(e))
}

fn csv_columns(records: &[Value]) -> Vec<String> {
    match records.first() {
        Some(Value::Object(m)) => m.keys().cloned().collect(),
        Some(_) => vec!["value".into()],
        None => Vec::new(),
    }
}

fn csv_cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(Value::Bool(b)) => b.to_string(),
        Some(other) => other.to_string(),
    }
}

/// The part of a written file that must be identical across replays: all
/// lines except the timestamp line (CSV) or the header object (JSON).
pub fn body_of(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with(TIMESTAMP_PREFIX) && !l.starts_with("{\"header\""))
        .map(|l| format!("{l}\n"))
        .collect()
}
