//! Per-iteration trace records and their CSV/JSON persistence.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::TraceFormat;

/// Column order of the CSV form.
pub const CSV_HEADER: &str = "k,f,r,r_tilde,xi,dt,alpha,grad_norm,indicator,status";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    #[default]
    Ok,
    Diverge,
    Error,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Diverge => "diverge",
            Status::Error => "error",
        }
    }
}

/// State of iteration `k` and the step taken from it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub f: f64,
    pub r: Option<f64>,
    pub r_tilde: Option<f64>,
    pub xi: Option<f64>,
    pub dt: Option<f64>,
    pub alpha: Option<f64>,
    pub grad_norm: Option<f64>,
    pub indicator: Option<f64>,
    pub status: Status,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source: e,
    }
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map_err(|e| Error::io(path, e))
}

pub fn write_csv(records: &[TraceRecord], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    writeln!(w, "{CSV_HEADER}").map_err(|e| Error::io(path, e))?;
    let mut cw = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for rec in records {
        cw.serialize(rec).map_err(|e| csv_err(path, e))?;
    }
    cw.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<TraceRecord>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = rd.headers().map_err(|e| csv_err(path, e))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "unexpected trace header".into(),
        });
    }
    rd.deserialize()
        .map(|r| r.map_err(|e| csv_err(path, e)))
        .collect()
}

/// JSON array of records. Non-finite floats become `null`.
pub fn write_json(records: &[TraceRecord], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    serde_json::to_writer_pretty(&mut w, records)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_trace(records: &[TraceRecord], path: &Path, format: TraceFormat) -> Result<()> {
    match format {
        TraceFormat::Csv => write_csv(records, path),
        TraceFormat::Json => write_json(records, path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trace_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_csv(&[], &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), format!("{CSV_HEADER}\n"));
        assert!(read_csv(&p).unwrap().is_empty());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let recs = vec![
            TraceRecord {
                k: 0,
                f: 0.1 + 0.2,
                r: Some(1.0 / 3.0),
                dt: Some(1e-300),
                ..Default::default()
            },
            TraceRecord {
                k: 1,
                f: f64::INFINITY,
                status: Status::Diverge,
                ..Default::default()
            },
        ];
        write_csv(&recs, &p).unwrap();
        assert_eq!(read_csv(&p).unwrap(), recs);
    }
}
