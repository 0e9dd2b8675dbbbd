//! Machine-readable command output: one JSON document per command, with
//! tabular data either embedded (`--format json`) or written as CSV files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Column-oriented table; cells are JSON numbers, strings or null.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&str]) -> Self {
        Self {
            name,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn to_json(&self) -> Value {
        json!({ "columns": self.columns, "rows": self.rows })
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell_text))?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Optional float as a JSON cell; non-finite values become null.
pub fn num(x: Option<f64>) -> Value {
    x.filter(|v| v.is_finite()).map_or(Value::Null, Value::from)
}

/// A complete command report.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub config: Value,
    pub result: Value,
    pub tables: Vec<Table>,
}

impl Report {
    /// JSON document with tables embedded.
    pub fn embedded_json(&self) -> Value {
        let tables: serde_json::Map<String, Value> = self
            .tables
            .iter()
            .map(|t| (t.name.to_string(), t.to_json()))
            .collect();
        json!({
            "command": self.command,
            "config": self.config,
            "result": self.result,
            "tables": tables,
        })
    }

    fn csv_file_name(&self, table: &Table) -> String {
        format!("{}_{}.csv", self.command, table.name)
    }

    /// Writes `<command>.json` plus, for CSV output, one file per table.
    /// Returns the paths written.
    pub fn write_to_dir(&self, dir: &Path, format: Format) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let doc = match format {
            Format::Json => self.embedded_json(),
            Format::Csv => {
                let mut files = Vec::new();
                for t in &self.tables {
                    let name = self.csv_file_name(t);
                    let path = dir.join(&name);
                    fs::write(&path, t.to_csv().map_err(io::Error::other)?)?;
                    written.push(path);
                    files.push(json!({ "table": t.name, "file": name }));
                }
                json!({
                    "command": self.command,
                    "config": self.config,
                    "result": self.result,
                    "files": files,
                })
            }
        };
        let path = dir.join(format!("{}.json", self.command));
        fs::write(&path, to_pretty(&doc))?;
        written.insert(0, path);
        Ok(written)
    }
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}
