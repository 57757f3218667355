//! Dataset CSV files and JSON output.
//!
//! A dataset file has header `x1,…,xd,y`; `d` is the column count minus one.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::RegressionDataset;

/// Formats `v` with 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Parses a dataset from `reader`; `path` only labels error messages.
pub fn read_csv<R: Read>(reader: R, path: &Path) -> Result<RegressionDataset> {
    let schema = |message: String| Error::Schema {
        path: path.to_path_buf(),
        message,
    };
    let mut rd = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rd.headers()?.clone();
    if headers.len() < 2 {
        return Err(schema(format!(
            "expected columns x1,...,xd,y but the header has {} column(s)",
            headers.len()
        )));
    }
    let d = headers.len() - 1;
    for (i, h) in headers.iter().enumerate() {
        let want = if i == d { "y".to_string() } else { format!("x{}", i + 1) };
        if h != want {
            return Err(schema(format!("column {}: expected {want:?}, found {h:?}", i + 1)));
        }
    }
    let mut data = RegressionDataset::empty(d)?;
    let mut x = vec![0.0; d];
    for record in rd.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row_err = |message: String| Error::Row {
            path: path.to_path_buf(),
            line,
            message,
        };
        if record.len() != d + 1 {
            return Err(row_err(format!("expected {} fields, found {}", d + 1, record.len())));
        }
        let parse = |i: usize| {
            record[i]
                .parse::<f64>()
                .map_err(|_| row_err(format!("{}: cannot parse {:?} as a number", &headers[i], &record[i])))
        };
        for (k, xk) in x.iter_mut().enumerate() {
            *xk = parse(k)?;
        }
        let y = parse(d)?;
        data.push(&x, y).map_err(|e| row_err(e.to_string()))?;
    }
    Ok(data)
}

pub fn load_csv(path: &Path) -> Result<RegressionDataset> {
    read_csv(File::open(path)?, path)
}

pub fn write_csv<W: Write>(data: &RegressionDataset, writer: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=data.dim()).map(|k| format!("x{k}")).collect();
    header.push("y".into());
    wr.write_record(&header)?;
    for (x, y) in data.iter() {
        wr.write_record(x.iter().chain([&y]).map(|v| format_f64(*v)))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn save_csv(data: &RegressionDataset, path: &Path) -> Result<()> {
    write_csv(data, BufWriter::new(File::create(path)?))
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize + ?Sized, W: Write>(value: &T, mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

pub fn emit_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    write_json(value, BufWriter::new(File::create(path)?))
}
