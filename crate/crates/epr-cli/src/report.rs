//! Report assembly: the JSON envelope every command writes, and the CSV
//! table the scan command produces.
//!
//! Outputs are fully deterministic for a fixed invocation of a fixed build:
//! serde structs serialize in declaration order, floats render with the
//! shortest round-tripping representation, and nothing embeds a timestamp.
//! Files are assembled in memory and written once.

use anyhow::{Context, Result};
use serde::Serialize;
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

/// Git description baked in at compile time ("unknown" outside a checkout).
pub const BUILD: &str = env!("BUILD_GIT_DESCRIBE");

/// Echo of the invocation that produced a report; every field the command
/// used is filled in, the rest stay null.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub model_file: Option<String>,
    pub family: Option<String>,
    pub n_bits: Option<u32>,
    pub gamma: Option<f64>,
    pub v1: Option<f64>,
    pub v2: Option<f64>,
    pub p1: Option<f64>,
    pub levels: Option<String>,
    pub j: Option<f64>,
    pub e0: Option<f64>,
    pub seed: Option<u64>,
    pub cavity: Option<String>,
    pub subspace: Option<String>,
    pub mode: Option<String>,
    pub start: Option<usize>,
    pub t: Option<f64>,
    pub t_grid: Option<Vec<f64>>,
    pub t_max: Option<f64>,
    pub samples: Option<u64>,
    pub workers: Option<usize>,
    pub tol: Option<f64>,
    pub param: Option<String>,
    pub range: Option<String>,
    pub steps: Option<usize>,
    pub analyses: Option<String>,
    pub out: Option<String>,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    format_version: u32,
    build: &'a str,
    config: &'a RunConfig,
    result: &'a T,
}

/// Render the standard envelope around a result.
pub fn render_json<T: Serialize>(config: &RunConfig, result: &T) -> Result<String> {
    let report = Report { format_version: FORMAT_VERSION, build: BUILD, config, result };
    let mut text = serde_json::to_string_pretty(&report).context("serializing report")?;
    text.push('\n');
    Ok(text)
}

/// Write the envelope to `path` in one shot.
pub fn write_json<T: Serialize>(path: &Path, config: &RunConfig, result: &T) -> Result<()> {
    let text = render_json(config, result)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// In-memory CSV table with a fixed header; `render` emits the whole file.
pub struct Csv {
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &'static [&'static str]) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest round-tripping float cell; empty for an analysis that didn't run.
pub fn cell(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// JSON-safe float: None when not finite (JSON has no Infinity).
pub fn finite(value: f64) -> Option<f64> {
    value.is_finite().then_some(value)
}
