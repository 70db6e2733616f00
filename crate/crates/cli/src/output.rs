//! CSV tables with fixed numeric formatting and the JSON metadata sidecar.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u128),
    Float(f64),
    Bool(bool),
}

impl Cell {
    /// Floats carry 12 significant digits in scientific notation.
    pub fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Float(x) => {
                let x = if *x == 0.0 { 0.0 } else { *x };
                format!("{x:.11e}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Rejects tables holding non-finite values.
    pub fn check_finite(&self) -> Result<(), CliError> {
        for (r, row) in self.rows.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                if let Cell::Float(x) = cell {
                    if !x.is_finite() {
                        return Err(aqec_core::Error::Numerical(format!(
                            "non-finite value in row {r}, column {}",
                            self.header[c]
                        ))
                        .into());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }
}

#[derive(Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: &'static str,
    csv: String,
    rows: usize,
    columns: &'a [&'static str],
    wall_time_ms: u128,
    config: &'a ExperimentConfig,
}

pub fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn emit(table: &Table, config: &ExperimentConfig, out: &Path, wall_time_ms: u128) -> Result<(), CliError> {
    table.check_finite()?;
    write(out, &table.to_csv()?)?;
    let meta = Meta {
        tool: "aqec",
        version: env!("CARGO_PKG_VERSION"),
        experiment: config.experiment.name(),
        csv: out.display().to_string(),
        rows: table.rows.len(),
        columns: &table.header,
        wall_time_ms,
        config,
    };
    let mut json = serde_json::to_vec_pretty(&meta).map_err(|e| CliError::Io(e.to_string()))?;
    json.push(b'\n');
    write(&meta_path(out), &json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting() {
        assert_eq!(Cell::Float(1.0 / 6.0).render(), "1.66666666667e-1");
        assert_eq!(Cell::Float(-0.0).render(), "0.00000000000e0");
        assert_eq!(Cell::Float(12345.0).render(), "1.23450000000e4");
    }

    #[test]
    fn csv_has_header_and_lf() {
        let mut t = Table::new(vec!["a", "b"]);
        t.push(vec![Cell::Text("x(p=0.1;q=2)".into()), Cell::Bool(true)]);
        let s = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(s, "a,b\nx(p=0.1;q=2),true\n");
    }

    #[test]
    fn rejects_nan() {
        let mut t = Table::new(vec!["v"]);
        t.push(vec![Cell::Float(f64::NAN)]);
        assert_eq!(t.check_finite().unwrap_err().exit_code(), 1);
    }

    #[test]
    fn meta_path_appends_suffix() {
        assert_eq!(meta_path(Path::new("out/r.csv")), PathBuf::from("out/r.csv.meta.json"));
    }
}
