use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use oncovir::csv::Table;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::Format;
use crate::error::CliError;

/// Collects emitted files and writes the manifest last.
pub struct Output {
    dir: PathBuf,
    format: Format,
    files: Vec<String>,
    summary: Map<String, Value>,
    started: Instant,
}

fn table_json(t: &Table) -> Value {
    let rows: Vec<Value> = t
        .rows
        .iter()
        .map(|row| {
            let obj: Map<String, Value> = t
                .header
                .iter()
                .zip(row)
                .map(|(h, cell)| {
                    let v = cell
                        .parse::<f64>()
                        .ok()
                        .and_then(|x| serde_json::Number::from_f64(x).map(Value::Number))
                        .unwrap_or_else(|| Value::String(cell.clone()));
                    (h.clone(), v)
                })
                .collect();
            Value::Object(obj)
        })
        .collect();
    Value::Array(rows)
}

impl Output {
    pub fn new(dir: &Path, format: Format) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            files: Vec::new(),
            summary: Map::new(),
            started: Instant::now(),
        })
    }

    fn write(&mut self, name: String, contents: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(&name), contents)?;
        self.files.push(name);
        Ok(())
    }

    /// Write a table as `<stem>.csv`, or `<stem>.json` in JSON format.
    pub fn table(&mut self, stem: &str, t: &Table) -> Result<(), CliError> {
        match self.format {
            Format::Csv => self.write(format!("{stem}.csv"), t.to_csv_string().as_bytes()),
            Format::Json => {
                let text = serde_json::to_string_pretty(&table_json(t)).expect("tables serialize");
                self.write(format!("{stem}.json"), text.as_bytes())
            }
        }
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Numerical(format!("cannot serialize {name}: {e}")))?;
        self.write(name.to_string(), text.as_bytes())
    }

    pub fn summarize<T: Serialize>(&mut self, key: &str, value: &T) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.summary.insert(key.to_string(), v);
    }

    /// Write `manifest.json` and return its path.
    pub fn finish(mut self, command: &str, config: &Value) -> Result<PathBuf, CliError> {
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "wall_time_seconds": self.started.elapsed().as_secs_f64(),
            "outputs": self.files,
            "summary": Value::Object(std::mem::take(&mut self.summary)),
        });
        let path = self.dir.join("manifest.json");
        fs::write(
            &path,
            serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
        )?;
        Ok(path)
    }
}
