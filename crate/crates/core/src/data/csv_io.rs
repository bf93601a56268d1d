use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::models::Dataset;

/// A CSV column by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl std::fmt::Display for Column {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Column::Index(i) => write!(f, "#{i}"),
            Column::Name(n) => write!(f, "{n:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub features: Vec<Column>,
    pub target: Column,
    #[serde(default = "default_header")]
    pub has_header: bool,
}

fn default_header() -> bool {
    true
}

fn resolve(col: &Column, header: Option<&csv::StringRecord>) -> Result<usize, DataError> {
    match (col, header) {
        (Column::Index(i), _) => Ok(*i),
        (Column::Name(name), Some(h)) => {
            h.iter().position(|f| f.trim() == name).ok_or_else(|| DataError::MissingColumn(name.clone()))
        }
        (Column::Name(name), None) => Err(DataError::MissingColumn(format!("{name} (named column requires a header)"))),
    }
}

/// Reads a dataset from CSV text. Line numbers in errors are 1-based and
/// count the header.
pub fn read_csv(reader: impl Read, schema: &CsvSchema) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(schema.has_header).from_reader(reader);
    let header = if schema.has_header { Some(rdr.headers().map_err(|e| parse_error(&e, None))?.clone()) } else { None };
    let mut cols: Vec<usize> = Vec::with_capacity(schema.features.len() + 1);
    for c in schema.features.iter().chain(std::iter::once(&schema.target)) {
        cols.push(resolve(c, header.as_ref())?);
    }
    let names: Vec<String> =
        schema.features.iter().chain(std::iter::once(&schema.target)).map(|c| c.to_string()).collect();
    let d = schema.features.len();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_error(&e, None))?;
        let line = rec.position().map_or(0, |p| p.line());
        for (k, &c) in cols.iter().enumerate() {
            let cell = rec.get(c).ok_or_else(|| DataError::Parse {
                line,
                column: Some(names[k].clone()),
                message: format!("row has only {} fields", rec.len()),
            })?;
            let v: f64 = cell.trim().parse().map_err(|_| DataError::Parse {
                line,
                column: Some(names[k].clone()),
                message: format!("{cell:?} is not a number"),
            })?;
            if k < d {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    let m = ys.len();
    Ok(Dataset::new(DMatrix::from_row_slice(m, d, &xs), DVector::from_vec(ys))?)
}

fn parse_error(e: &csv::Error, column: Option<String>) -> DataError {
    let line = e.position().map_or(0, |p| p.line());
    DataError::Parse { line, column, message: e.to_string() }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    read_csv(file, schema)
}

/// Writes `x0, ..., x{d-1}, y` with a header row. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv_to(writer: impl Write, data: &Dataset) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| DataError::Parse { line: 0, column: None, message: e.to_string() };
    let mut header: Vec<String> = (0..data.dim()).map(|c| format!("x{c}")).collect();
    header.push("y".into());
    w.write_record(&header).map_err(to_err)?;
    for r in 0..data.len() {
        let mut rec: Vec<String> = data.inputs().row(r).iter().map(|v| format!("{v:?}")).collect();
        rec.push(format!("{:?}", data.outputs()[r]));
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|e| DataError::Parse { line: 0, column: None, message: e.to_string() })
}

pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    write_csv_to(std::io::BufWriter::new(file), data)
}

impl CsvSchema {
    /// The layout produced by [`write_csv`] for `dim` features.
    pub fn written(dim: usize) -> Self {
        Self {
            features: (0..dim).map(|c| Column::Name(format!("x{c}"))).collect(),
            target: Column::Name("y".into()),
            has_header: true,
        }
    }
}
