//! Output files: `%.12g` number formatting, CSV tables and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Formats like C's `%.12g`.
pub fn fmt_g(x: f64) -> String {
    fmt_g_prec(x, 12)
}

pub fn fmt_g_prec(x: f64, prec: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let p = prec.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_g).unwrap_or_else(|| "nan".into())
}

/// A table with a fixed column order, written as CSV.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_header(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| CliError::runtime(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::runtime(e.to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
    /// False for files holding wall-clock measurements.
    pub deterministic: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub master_seed: u64,
    pub config: serde_json::Value,
    pub outputs: Vec<OutputRecord>,
    pub timings_seconds: Vec<(String, f64)>,
    pub failures: Vec<serde_json::Value>,
}

/// Collects the files of one run. Writes happen on the calling thread, one
/// file at a time.
pub struct OutputDir {
    root: PathBuf,
    manifest: Manifest,
}

pub const MANIFEST: &str = "manifest.json";

impl OutputDir {
    pub fn create(root: &Path, command: &str, master_seed: u64, config: serde_json::Value) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest: Manifest {
                tool: "dada-kit",
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                master_seed,
                config,
                outputs: Vec::new(),
                timings_seconds: Vec::new(),
                failures: Vec::new(),
            },
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8], deterministic: bool) -> CliResult<()> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        self.manifest.outputs.push(OutputRecord {
            file: name.to_string(),
            sha256: format!("{:x}", Sha256::digest(bytes)),
            bytes: bytes.len(),
            deterministic,
        });
        Ok(())
    }

    pub fn table(&mut self, name: &str, table: &Table) -> CliResult<()> {
        self.write_bytes(name, &table.to_csv()?, true)
    }

    pub fn volatile_table(&mut self, name: &str, table: &Table) -> CliResult<()> {
        self.write_bytes(name, &table.to_csv()?, false)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::runtime(e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes(), true)
    }

    pub fn timing(&mut self, label: &str, seconds: f64) {
        self.manifest.timings_seconds.push((label.to_string(), seconds));
    }

    pub fn failure<T: Serialize>(&mut self, f: &T) {
        if let Ok(v) = serde_json::to_value(f) {
            self.manifest.failures.push(v);
        }
    }

    pub fn finish(self) -> CliResult<Manifest> {
        let mut text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::runtime(e.to_string()))?;
        text.push('\n');
        let path = self.root.join(MANIFEST);
        fs::write(&path, text).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(self.manifest)
    }
}

/// Finite floats as JSON numbers, everything else as `null`.
pub fn json_f64(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(fmt_g(0.0), "0");
        assert_eq!(fmt_g(1.0), "1");
        assert_eq!(fmt_g(-2.5), "-2.5");
        assert_eq!(fmt_g(0.1), "0.1");
        assert_eq!(fmt_g(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_g(123456789012.0), "123456789012");
        assert_eq!(fmt_g(1234567890123.0), "1.23456789012e+12");
        assert_eq!(fmt_g(0.0001), "0.0001");
        assert_eq!(fmt_g(0.00001234), "1.234e-05");
        assert_eq!(fmt_g(1e100), "1e+100");
        assert_eq!(fmt_g(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_g(f64::NAN), "nan");
        assert_eq!(fmt_g(999999999999.5), "1e+12");
        assert_eq!(fmt_g(8.0 / 3.0), "2.66666666667");
    }

    #[test]
    fn table_writes_header_first() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "2".into()]);
        assert_eq!(String::from_utf8(t.to_csv().unwrap()).unwrap(), "a,b\n1,2\n");
    }
}
