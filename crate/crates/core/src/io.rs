//! CSV curves (`omega,sigma[,fit]`) and JSON reports.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Channel, SpectralCurve};

/// Writes a header and one row per sample. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_curve<W: Write>(out: W, curve: &SpectralCurve, fit: Option<&[f64]>) -> Result<()> {
    if let Some(f) = fit {
        if f.len() != curve.len() {
            return Err(Error::InvalidCurve(format!(
                "{} fit values for {} samples",
                f.len(),
                curve.len()
            )));
        }
    }
    let mut w = csv::Writer::from_writer(out);
    match fit {
        Some(f) => {
            w.write_record(["omega", "sigma", "fit"])?;
            for ((e, s), v) in curve.points().zip(f) {
                w.write_record([e.to_string(), s.to_string(), v.to_string()])?;
            }
        }
        None => {
            w.write_record(["omega", "sigma"])?;
            for (e, s) in curve.points() {
                w.write_record([e.to_string(), s.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve_file(path: &Path, curve: &SpectralCurve, fit: Option<&[f64]>) -> Result<()> {
    let mut buf = Vec::new();
    write_curve(&mut buf, curve, fit)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Reads `omega` and `sigma` columns by header name; other columns are ignored.
pub fn read_curve<R: Read>(input: R, channel: Channel) -> Result<SpectralCurve> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = r.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("missing column '{name}'")))
    };
    let (ie, is) = (column("omega")?, column("sigma")?);
    let mut energies = Vec::new();
    let mut values = Vec::new();
    for (row, record) in r.records().enumerate() {
        let record = record?;
        let parse = |i: usize| -> Result<f64> {
            let field = record.get(i).unwrap_or("");
            field
                .parse()
                .map_err(|_| Error::Format(format!("row {}: cannot parse '{field}'", row + 1)))
        };
        energies.push(parse(ie)?);
        values.push(parse(is)?);
    }
    if energies.is_empty() {
        return Err(Error::EmptyCurve);
    }
    SpectralCurve::new(energies, values, channel)
}

pub fn read_curve_file(path: &Path, channel: Channel) -> Result<SpectralCurve> {
    read_curve(fs::File::open(path)?, channel)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}
