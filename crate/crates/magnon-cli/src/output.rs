//! CSV and JSON emission. Floats are written in full-precision scientific
//! notation (17 significant digits) so every file re-parses to the exact
//! in-memory values.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::CliError;

/// One CSV cell.
#[derive(Debug, Clone)]
pub enum Cell {
    Text(String),
    Int(i64),
    Float(f64),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format!("{x:.16e}"),
        }
    }
}

pub fn text(s: impl Into<String>) -> Cell {
    Cell::Text(s.into())
}

pub fn int(i: usize) -> Cell {
    Cell::Int(i as i64)
}

pub fn float(x: f64) -> Cell {
    Cell::Float(x)
}

fn open_sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        None => Ok(Box::new(io::stdout().lock())),
        Some(p) => {
            let file = File::create(p)
                .map_err(|e| CliError::Validation(format!("cannot write {p:?}: {e}")))?;
            Ok(Box::new(BufWriter::new(file)))
        }
    }
}

pub fn write_csv(
    path: Option<&PathBuf>,
    header: &[&str],
    rows: impl Iterator<Item = Vec<Cell>>,
) -> Result<(), CliError> {
    let mut sink = open_sink(path.map(|p| p.as_path()))?;
    let io_err = |e: io::Error| CliError::Validation(format!("write failed: {e}"));
    writeln!(sink, "{}", header.join(",")).map_err(io_err)?;
    for row in rows {
        let line: Vec<String> = row.iter().map(Cell::render).collect();
        writeln!(sink, "{}", line.join(",")).map_err(io_err)?;
    }
    sink.flush().map_err(io_err)
}

pub fn write_json(path: Option<&PathBuf>, value: &serde_json::Value) -> Result<(), CliError> {
    let mut sink = open_sink(path.map(|p| p.as_path()))?;
    let io_err = |e: io::Error| CliError::Validation(format!("write failed: {e}"));
    serde_json::to_writer_pretty(&mut sink, value)
        .map_err(|e| CliError::Validation(format!("json encoding failed: {e}")))?;
    writeln!(sink).map_err(io_err)?;
    sink.flush().map_err(io_err)
}
