//! CSV and JSON exchange formats.
//!
//! CSV files use a comma separator, '.' decimals, one header row and LF line
//! endings. Floats are written with Rust's shortest round-trip formatting so
//! a file read back reproduces the values bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::dipolar::SampledCurve;
use crate::error::{Error, Result};
use crate::spinsim::TimeSeries;

pub const SPECTRUM_HEADER: [&str; 2] = ["frequency_khz", "intensity"];
pub const TIMESERIES_HEADER: [&str; 2] = ["t_seconds", "value"];

/// Fewest data rows accepted for a curve or a time series.
pub const MIN_ROWS: usize = 4;

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn write_columns<W: Write>(w: W, header: [&str; 2], a: &[f64], b: &[f64]) -> Result<()> {
    let mut out = writer(w);
    let map = |e: csv::Error| Error::Io(std::io::Error::other(e));
    out.write_record(header).map_err(map)?;
    for (x, y) in a.iter().zip(b) {
        out.write_record([x.to_string(), y.to_string()]).map_err(map)?;
    }
    out.flush()?;
    Ok(())
}

fn read_columns<R: Read>(r: R, header: [&str; 2]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let got = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    let names: Vec<&str> = got.iter().map(str::trim).collect();
    if names.len() != 2 || names[0] != header[0] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header '{},{}', found '{}'", header[0], header[1], names.join(",")),
        });
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(Error::Parse { line, message: format!("expected 2 fields, found {}", rec.len()) });
        }
        let field = |i: usize| -> Result<f64> {
            let s = rec[i].trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line, message: format!("'{s}' is not a finite number") })
        };
        a.push(field(0)?);
        b.push(field(1)?);
    }
    if a.len() < MIN_ROWS {
        return Err(Error::precondition(format!(
            "file has {} data rows; at least {MIN_ROWS} are required",
            a.len()
        )));
    }
    Ok((a, b))
}

pub fn write_spectrum<W: Write>(w: W, curve: &SampledCurve) -> Result<()> {
    write_columns(w, SPECTRUM_HEADER, &curve.frequencies, &curve.intensities)
}

/// Reads a spectrum. The second column may carry any name.
pub fn read_spectrum<R: Read>(r: R) -> Result<SampledCurve> {
    let (f, y) = read_columns(r, SPECTRUM_HEADER)?;
    SampledCurve::new(f, y)
}

pub fn write_timeseries<W: Write>(w: W, ts: &TimeSeries) -> Result<()> {
    let t: Vec<f64> = ts.times().collect();
    write_columns(w, TIMESERIES_HEADER, &t, &ts.values)
}

/// Reads a uniformly sampled series; the spacing must be constant to 1e-6
/// relative.
pub fn read_timeseries<R: Read>(r: R) -> Result<TimeSeries> {
    let (t, v) = read_columns(r, TIMESERIES_HEADER)?;
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    for (i, w) in t.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.abs() {
            return Err(Error::Parse { line: i + 3, message: "time samples are not uniformly spaced".into() });
        }
    }
    TimeSeries::new(dt, v)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn from_json<T: DeserializeOwned>(s: &str) -> Result<T> {
    Ok(serde_json::from_str(s)?)
}

pub fn save_spectrum(path: &Path, curve: &SampledCurve) -> Result<()> {
    write_spectrum(std::fs::File::create(path)?, curve)
}

pub fn load_spectrum(path: &Path) -> Result<SampledCurve> {
    read_spectrum(std::fs::File::open(path)?)
}

pub fn save_timeseries(path: &Path, ts: &TimeSeries) -> Result<()> {
    write_timeseries(std::fs::File::create(path)?, ts)
}

pub fn load_timeseries(path: &Path) -> Result<TimeSeries> {
    read_timeseries(std::fs::File::open(path)?)
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = to_json(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json(&std::fs::read_to_string(path)?)
}
