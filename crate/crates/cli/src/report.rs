use anyhow::{Context, Result};
use serde_json::{json, Map, Value};
use std::io::Write;
use std::path::Path;

/// One CSV table plus the itemized budget breaches found while filling it.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub breaches: Vec<String>,
    /// extra summary fields
    pub stats: Map<String, Value>,
}

/// Shortest round-trip formatting, independent of locale.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new(), breaches: Vec::new(), stats: Map::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Record a row check; returns the `pass` column value.
    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) -> String {
        if !ok {
            self.breaches.push(what());
        }
        ok.to_string()
    }

    pub fn stat(&mut self, key: &str, v: impl Into<Value>) {
        self.stats.insert(key.to_string(), v.into());
    }

    pub fn csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().context("flushing csv")
    }

    pub fn summary(&self, command: &str, settings: &impl serde::Serialize) -> Value {
        json!({
            "schema": 1,
            "command": command,
            "settings": settings,
            "rows": self.rows.len(),
            "breaches": self.breaches,
            "stats": self.stats,
        })
    }

    /// Write `<out>/<command>.csv` and `.json`, or CSV to stdout and the summary to stderr.
    pub fn emit(&self, command: &str, settings: &impl serde::Serialize, out: Option<&Path>) -> Result<()> {
        let csv = self.csv_bytes()?;
        let summary = serde_json::to_string_pretty(&self.summary(command, settings))?;
        match out {
            Some(dir) => {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                std::fs::write(dir.join(format!("{command}.csv")), csv)?;
                std::fs::write(dir.join(format!("{command}.json")), summary + "\n")?;
            }
            None => {
                std::io::stdout().write_all(&csv)?;
                writeln!(std::io::stderr(), "{summary}")?;
            }
        }
        Ok(())
    }
}
