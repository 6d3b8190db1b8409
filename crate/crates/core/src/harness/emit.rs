//! CSV and JSON serialization of experiment results.
//!
//! Floats are written with Rust's shortest round-trip formatting, so output
//! bytes depend only on the values. CSV uses `,`, `.` decimals and `\n` line
//! endings; missing values are empty fields.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::config::Format;
use super::HarnessError;

/// A result that can be written as a table or a JSON document.
pub trait Report: Serialize {
    fn csv_header(&self) -> Vec<&'static str>;
    fn csv_rows(&self) -> Vec<Vec<String>>;
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn to_csv<R: Report + ?Sized>(report: &R) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| HarnessError::Io {
        path: "<csv buffer>".into(),
        message: e.to_string(),
    };
    w.write_record(report.csv_header()).map_err(io)?;
    for row in report.csv_rows() {
        w.write_record(&row).map_err(io)?;
    }
    w.into_inner().map_err(|e| HarnessError::Io {
        path: "<csv buffer>".into(),
        message: e.to_string(),
    })
}

pub fn to_json<R: Serialize + ?Sized>(report: &R) -> Result<Vec<u8>, HarnessError> {
    let mut out = serde_json::to_vec_pretty(report).map_err(|e| HarnessError::Io {
        path: "<json buffer>".into(),
        message: e.to_string(),
    })?;
    out.push(b'\n');
    Ok(out)
}

pub fn render<R: Report + ?Sized>(report: &R, format: Format) -> Result<Vec<u8>, HarnessError> {
    match format {
        Format::Csv => to_csv(report),
        Format::Json => to_json(report),
    }
}

/// Writes `report` to `path`, or to stdout when `path` is `None`.
pub fn emit<R: Report + ?Sized>(
    report: &R,
    path: Option<&Path>,
    format: Format,
) -> Result<(), HarnessError> {
    let bytes = render(report, format)?;
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| HarnessError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        }),
        None => std::io::stdout()
            .lock()
            .write_all(&bytes)
            .map_err(|e| HarnessError::Io {
                path: "<stdout>".into(),
                message: e.to_string(),
            }),
    }
}
