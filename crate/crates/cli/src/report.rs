//! Experiment reports: deterministic CSV payloads plus a JSON summary that
//! echoes the full effective configuration.

use serde::Serialize;
use serde_json::{Map, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Accumulates CSV outputs and assertions for one command run. The CSVs are
/// byte-identical across runs with the same config; wall-clock time appears
/// only in the JSON summary.
pub struct Report {
    command: &'static str,
    out_dir: PathBuf,
    config: Map<String, Value>,
    outputs: Vec<String>,
    assertions: Vec<Assertion>,
    started: Instant,
}

impl Report {
    pub fn new(command: &'static str, out_dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(out_dir)?;
        Ok(Self {
            command,
            out_dir: out_dir.to_path_buf(),
            config: Map::new(),
            outputs: Vec::new(),
            assertions: Vec::new(),
            started: Instant::now(),
        })
    }

    /// Record one effective configuration entry (defaults included).
    pub fn config(&mut self, key: &str, value: impl Into<Value>) {
        self.config.insert(key.to_string(), value.into());
    }

    /// Write a CSV file: header row, LF line endings, `.` decimal separator
    /// (Rust's shortest round-trip float formatting).
    pub fn write_csv(&mut self, name: &str, header: &str, rows: &[Vec<String>]) -> std::io::Result<()> {
        let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        fs::write(self.out_dir.join(name), text)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> std::io::Result<()> {
        fs::write(self.out_dir.join(name), text)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: String) {
        if pass {
            println!("  [ok] {name}: {detail}");
        } else {
            eprintln!("  [FAIL] {name}: {detail}");
        }
        self.assertions.push(Assertion {
            name: name.to_string(),
            pass,
            detail,
        });
    }

    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    /// Write the JSON summary and return overall pass/fail.
    pub fn finish(self) -> std::io::Result<bool> {
        #[derive(Serialize)]
        struct Summary<'a> {
            schema_version: u32,
            command: &'a str,
            config: &'a Map<String, Value>,
            outputs: &'a [String],
            assertions: &'a [Assertion],
            pass: bool,
            duration_seconds: f64,
        }
        let pass = self.all_passed();
        let summary = Summary {
            schema_version: SCHEMA_VERSION,
            command: self.command,
            config: &self.config,
            outputs: &self.outputs,
            assertions: &self.assertions,
            pass,
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = self.out_dir.join(format!("{}_summary.json", self.command));
        fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
        println!(
            "{}: {} ({} assertions) -> {}",
            self.command,
            if pass { "pass" } else { "FAIL" },
            self.assertions.len(),
            path.display()
        );
        Ok(pass)
    }
}

/// Shortest round-trip decimal form of a float for CSV cells.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}
