//! CSV trace files. Every numeric field is written with 17 significant
//! digits so that parsing a file back reproduces the values exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const STATE_TRACE: &str = "state_trace.csv";
pub const HYPER_TRACE: &str = "hyper_trace.csv";
pub const MISE_TRACE: &str = "mise_trace.csv";
pub const INNOVATION_TRACE: &str = "innovation_trace.csv";

pub const STATE_COLUMNS: &[&str] = &["step", "t", "x", "mean", "var", "truth"];
pub const HYPER_COLUMNS: &[&str] = &["step", "sigma_se", "l", "sigma_q", "sigma_r", "nlml"];
pub const MISE_COLUMNS: &[&str] = &["step", "t", "mise"];
pub const INNOVATION_COLUMNS: &[&str] = &["step", "innovation_norm", "predictive_loglik"];

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV file with a fixed header: one integer `step` column followed by
/// floating point columns.
pub struct CsvTrace {
    out: BufWriter<File>,
    columns: usize,
}

impl CsvTrace {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", header.join(","))?;
        Ok(Self {
            out,
            columns: header.len(),
        })
    }

    pub fn row(&mut self, step: usize, values: &[f64]) -> Result<()> {
        assert_eq!(values.len() + 1, self.columns, "row width does not match header");
        write!(self.out, "{step}")?;
        for v in values {
            write!(self.out, ",{}", fmt_f64(*v))?;
        }
        writeln!(self.out)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// A parsed trace: header names and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Reads a trace back, checking the column count of every row.
pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Io(format!("{}: empty file", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Io(format!("{}: line {}: {e}", path.display(), i + 2)))?;
        if row.len() != header.len() {
            return Err(Error::Io(format!(
                "{}: line {} has {} fields, header has {}",
                path.display(),
                i + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}
