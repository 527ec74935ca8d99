use std::path::Path;

use kronshrink::io::fmt_f64;

use crate::config::{usage, Failure};

pub enum Cell {
    Int(usize),
    Real(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Self::Int(v) => v.to_string(),
            Self::Real(v) => fmt_f64(*v),
            Self::Text(s) => s.clone(),
        }
    }
}

pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<Cell>>) -> Result<(), Failure> {
    let err = |e: csv::Error| usage!("{}: {e}", path.display());
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row.iter().map(Cell::render)).map_err(err)?;
    }
    w.flush().map_err(|e| usage!("{}: {e}", path.display()))
}

/// `index,<name>` rows for a 1-based sequence.
pub fn write_series(path: &Path, name: &str, values: &[f64]) -> Result<(), Failure> {
    write_table(path, &["index", name], values.iter().enumerate().map(|(i, v)| vec![Cell::Int(i + 1), Cell::Real(*v)]))
}
