#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dada-kit"));
    c.env_remove("DADA_KIT_WORKERS");
    c
}

/// Runs the tool, returning its output; `args` follow the binary name.
pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn dada-kit")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "dada-kit {args:?} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Reads a CSV with a header into one map per row.
pub fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let header = rdr.headers().unwrap().clone();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            header
                .iter()
                .map(String::from)
                .zip(r.iter().map(String::from))
                .collect()
        })
        .collect()
}

pub fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row.get(key)
        .unwrap_or_else(|| panic!("no column {key}"))
        .parse()
        .unwrap_or_else(|_| panic!("column {key} is not numeric: {:?}", row[key]))
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Files the manifest marks reproducible, with their contents.
pub fn deterministic_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let manifest = read_json(&dir.join("manifest.json"));
    manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|o| o["deterministic"].as_bool().unwrap())
        .map(|o| {
            let name = o["file"].as_str().unwrap().to_string();
            let bytes = fs::read(dir.join(&name)).unwrap();
            (name, bytes)
        })
        .collect()
}

pub fn l63_config(lambda: f64, sigma_r: f64, steps: usize, seed: u64) -> String {
    format!(
        r#"{{"schema_version": 1, "model": {{"kind": "l63", "lambda": {lambda}, "dt": 0.01, "sigma_q": 0.1}}, "sigma_r": {sigma_r}, "steps": {steps}, "seed": {seed}, "attractor_samples": 2000, "filter": {{"kind": "enkf", "ensemble_size": 50, "inflation": 1.0}}}}"#
    )
}
