//! Run artifacts: check blocks, manifest and CSV tables.
//!
//! Every file is written to a temporary sibling and renamed into place.
//! `checks.json` carries no timings, so reruns with the same seed and thread
//! count reproduce it byte for byte; wall times live in `manifest.json`.

use fraclap_core::checks::Status;
use serde::Serialize;
use serde_json::Value;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckBlock {
    pub name: String,
    pub scenario: String,
    pub status: Status,
    pub metrics: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub file: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(file: impl Into<String>, columns: &[&str]) -> Self {
        Self { file: file.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = format!("# columns: {}\n", self.columns.join(", "));
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub scenario: String,
    pub blocks: Vec<CheckBlock>,
    pub tables: Vec<Table>,
    /// Named phase durations in seconds.
    pub wall_times: Vec<(String, f64)>,
    /// Solver statistics and other run details kept out of `checks.json`.
    pub notes: serde_json::Map<String, Value>,
    pub error: Option<String>,
}

impl ExperimentReport {
    pub fn new(scenario: impl Into<String>) -> Self {
        Self { scenario: scenario.into(), ..Self::default() }
    }

    pub fn add(&mut self, name: &str, status: Status, metrics: Value) {
        assert!(self.block(name).is_none(), "check {name} reported twice");
        self.blocks.push(CheckBlock { name: name.into(), scenario: self.scenario.clone(), status, metrics });
    }

    pub fn block(&self, name: &str) -> Option<&CheckBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.blocks.iter().filter(|b| b.status.is_failure()).map(|b| b.name.as_str()).collect()
    }

    /// 0 when no asserted check failed, 1 otherwise, 2 after an error.
    pub fn exit_code(&self) -> i32 {
        if self.error.is_some() {
            2
        } else if self.failed().is_empty() {
            0
        } else {
            1
        }
    }

    pub fn checks_json(&self) -> String {
        serde_json::to_string_pretty(&self.blocks).expect("check blocks serialize") + "\n"
    }

    pub fn manifest(&self, config_echo: &str, seed: u64, threads: usize) -> Value {
        let mut files: Vec<String> = self.tables.iter().map(|t| t.file.clone()).collect();
        files.push("checks.json".into());
        let times: serde_json::Map<String, Value> =
            self.wall_times.iter().map(|(k, v)| (k.clone(), Value::from(*v))).collect();
        serde_json::json!({
            "tool": "fraclap",
            "version": env!("CARGO_PKG_VERSION"),
            "scenario": self.scenario,
            "seed": seed,
            "threads": threads,
            "config": config_echo,
            "wall_times": times,
            "notes": self.notes,
            "artifacts": files,
            "checks": self.blocks.iter().map(|b| serde_json::json!({"name": b.name, "status": b.status})).collect::<Vec<_>>(),
            "exit_code": self.exit_code(),
            "error": self.error,
        })
    }

    pub fn write(&self, dir: &Path, config_echo: &str, seed: u64, threads: usize) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for t in &self.tables {
            written.push(write_atomic(&dir.join(&t.file), t.render().as_bytes())?);
        }
        written.push(write_atomic(&dir.join("checks.json"), self.checks_json().as_bytes())?);
        let manifest = serde_json::to_string_pretty(&self.manifest(config_echo, seed, threads)).expect("manifest") + "\n";
        written.push(write_atomic(&dir.join("manifest.json"), manifest.as_bytes())?);
        Ok(written)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<PathBuf> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(path.to_path_buf())
}
