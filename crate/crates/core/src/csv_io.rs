//! CSV readers and writers for dense matrices, observation triples and
//! embedding tables.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::priors::EmbeddingTable;

fn parse_cell(cell: &str, line: usize) -> Result<f64> {
    let t = cell.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    t.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("`{t}` is not a number"),
    })
}

/// Dense numeric CSV without a header. Empty cells and `NaN` become NaN.
pub fn read_dense<R: Read>(reader: R) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {w} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        for cell in record.iter() {
            values.push(parse_cell(cell, line)?);
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_dense_file(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    read_dense(std::fs::File::open(path)?)
}

/// Writes with shortest round-trip formatting; NaN as `NaN`.
pub fn write_dense<W: Write>(writer: W, values: ArrayView2<f64>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in values.rows() {
        wtr.write_record(row.iter().map(|v| if v.is_nan() { "NaN".to_string() } else { v.to_string() }))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_dense_file(path: impl AsRef<Path>, values: ArrayView2<f64>) -> Result<()> {
    write_dense(std::fs::File::create(path)?, values)
}

/// `row,col,value` triples with a header line.
pub fn read_triples<R: Read>(reader: R) -> Result<Vec<(usize, usize, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx + 2, |p| p.line() as usize);
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected row,col,value, found {} fields", record.len()),
            });
        }
        let index = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line,
                message: format!("`{s}` is not a nonnegative index"),
            })
        };
        let value = record[2].parse::<f64>().map_err(|_| Error::Parse {
            line,
            message: format!("`{}` is not a number", &record[2]),
        })?;
        out.push((index(&record[0])?, index(&record[1])?, value));
    }
    Ok(out)
}

pub fn read_triples_file(path: impl AsRef<Path>) -> Result<Vec<(usize, usize, f64)>> {
    read_triples(std::fs::File::open(path)?)
}

/// First column is the key, remaining columns the vector. A row keyed `*`
/// supplies the fallback vector for unknown keys.
pub fn read_embedding_table<R: Read>(reader: R) -> Result<EmbeddingTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut keys = Vec::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let mut default = None;
    let mut dim = None;
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.len() < 2 {
            return Err(Error::Parse {
                line,
                message: "expected a key followed by at least one value".into(),
            });
        }
        let vals = record
            .iter()
            .skip(1)
            .map(|c| {
                c.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{c}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(vals.len()),
            Some(d) if d != vals.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {d} values, found {}", vals.len()),
                })
            }
            _ => {}
        }
        if &record[0] == "*" {
            default = Some(vals);
        } else {
            keys.push(record[0].to_string());
            vectors.push(vals);
        }
    }
    let dim = dim.unwrap_or(0);
    let mut mat = Array2::zeros((dim, keys.len()));
    for (j, v) in vectors.iter().enumerate() {
        for (i, x) in v.iter().enumerate() {
            mat[(i, j)] = *x;
        }
    }
    EmbeddingTable::new(keys, mat, default.map(ndarray::Array1::from))
}

pub fn read_embedding_table_file(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    read_embedding_table(std::fs::File::open(path)?)
}
