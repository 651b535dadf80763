//! Delimited numeric tables: one header row, index column first, values
//! written with 9 significant digits.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};

/// Name of the index column of time-series tables.
pub const TIME_COLUMN: &str = "tau_us";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    /// Header of the first column.
    pub index_name: String,
    pub index: Vec<f64>,
    /// Headers of the value columns.
    pub columns: Vec<String>,
    /// `values[c][k]` is column `c` at row `k`.
    pub values: Vec<Vec<f64>>,
}

/// Shortest decimal that round-trips the value rounded to 9 significant
/// digits.
pub fn format_value(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    format!("{rounded}")
}

impl Table {
    pub fn time_series(index: Vec<f64>) -> Self {
        Self::new(TIME_COLUMN, index)
    }

    pub fn new(index_name: &str, index: Vec<f64>) -> Self {
        Self { index_name: index_name.into(), index, columns: Vec::new(), values: Vec::new() }
    }

    /// Appends a column; panics if its length differs from the index.
    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.push_column(name, values);
        self
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) {
        assert_eq!(values.len(), self.index.len(), "column length must match the index");
        self.columns.push(name.into());
        self.values.push(values);
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().position(|c| c == name).map(|k| self.values[k].as_slice())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Data(format!("writing table: {e}"));
        out.write_record(std::iter::once(&self.index_name).chain(&self.columns)).map_err(io)?;
        for (k, x) in self.index.iter().enumerate() {
            let row = std::iter::once(format_value(*x)).chain(self.values.iter().map(|c| format_value(c[k])));
            out.write_record(row).map_err(io)?;
        }
        out.flush().map_err(|e| Error::Data(format!("writing table: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("table text is UTF-8")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers().map_err(|e| Error::Data(format!("reading table header: {e}")))?.clone();
        if header.is_empty() {
            return Err(Error::Data("table has no header".into()));
        }
        let mut table = Self::new(&header[0], Vec::new());
        table.columns = header.iter().skip(1).map(str::to_owned).collect();
        table.values = vec![Vec::new(); table.columns.len()];
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| Error::Data(format!("reading table: {e}")))?;
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| Error::Data(format!("row {}: {s:?} is not a number", line + 2)))
            };
            table.index.push(parse(&rec[0])?);
            for (c, field) in rec.iter().skip(1).enumerate() {
                table.values[c].push(parse(field)?);
            }
        }
        Ok(table)
    }

    /// Checks that the first column is the evolution time.
    pub fn require_time_series(&self) -> Result<()> {
        if self.index_name != TIME_COLUMN {
            return Err(Error::Data(format!("first column is {:?}, expected {TIME_COLUMN:?}", self.index_name)));
        }
        Ok(())
    }
}
