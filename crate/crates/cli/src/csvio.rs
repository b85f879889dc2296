//! Minimal CSV emission: header row, comma separators, floats with 17
//! significant digits, LF line endings — byte-identical across runs.

use crate::{CliError, CliResult};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "row width does not match header"
        );
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, out: Option<&Path>) -> CliResult<()> {
        match out {
            Some(path) => std::fs::write(path, self.render())?,
            None => std::io::stdout()
                .write_all(self.render().as_bytes())
                .map_err(CliError::from)?,
        }
        Ok(())
    }
}

/// Read a two-column `value,measure` CSV (header required).
pub fn read_samples(path: &Path) -> CliResult<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config("empty CSV".into()))?;
    if header.split(',').count() != 2 {
        return Err(CliError::Config(format!(
            "expected two-column value,measure CSV, header was {header:?}"
        )));
    }
    let mut pairs = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let parse = |cell: Option<&str>| -> CliResult<f64> {
            cell.and_then(|c| c.trim().parse().ok())
                .ok_or_else(|| CliError::Config(format!("CSV line {}: {line:?}", i + 2)))
        };
        let value = parse(cells.next())?;
        let measure = parse(cells.next())?;
        pairs.push((value, measure));
    }
    Ok(pairs)
}
