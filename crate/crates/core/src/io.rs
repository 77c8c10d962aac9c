//! Spectra CSV: header `wavenumber,<label1>,...`, one row per grid point.

use std::io::{Read, Write};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::spectrum::{Spectrum, SpectrumSet, WavenumberGrid};

/// Relative tolerance on the wavenumber step when checking equidistance.
pub const GRID_TOLERANCE: f64 = 1e-6;

pub fn read_spectra_csv<R: Read>(reader: R) -> Result<SpectrumSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "header needs `wavenumber` plus at least one label".into(),
        });
    }
    if !header[0].eq_ignore_ascii_case("wavenumber") {
        return Err(Error::Parse {
            line: 1,
            message: format!("first column must be `wavenumber`, found `{}`", &header[0]),
        });
    }
    let labels: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let width = header.len();

    let mut wavenumbers = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let mut fields = rec.iter().map(|f| {
            f.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("`{f}` is not a number"),
            })
        });
        wavenumbers.push(fields.next().expect("width checked")?);
        for (col, field) in columns.iter_mut().zip(fields) {
            col.push(field?);
        }
    }

    let grid = grid_from_axis(&wavenumbers)?;
    let signals = labels
        .into_iter()
        .zip(columns)
        .map(|(label, col)| Spectrum::new(grid, DVector::from_vec(col), Some(label)))
        .collect::<Result<Vec<_>>>()?;
    SpectrumSet::new(grid, signals)
}

fn grid_from_axis(w: &[f64]) -> Result<WavenumberGrid> {
    if w.len() < 3 {
        return Err(Error::InvalidGrid(format!(
            "need at least 3 grid rows, found {}",
            w.len()
        )));
    }
    let grid = WavenumberGrid::new(w[0], w[w.len() - 1], w.len())?;
    let step = grid.step();
    for (j, pair) in w.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidGrid(format!(
                "wavenumber not strictly increasing at row {}",
                j + 2
            )));
        }
        let dev = (pair[1] - pair[0] - step).abs();
        if dev > GRID_TOLERANCE * step {
            return Err(Error::InvalidGrid(format!(
                "wavenumber step at row {} deviates from {step} by {dev:e}",
                j + 2
            )));
        }
    }
    Ok(grid)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Writes a set using shortest round-trip float formatting, so reruns are byte-identical.
pub fn write_spectra_csv<W: Write>(writer: W, set: &SpectrumSet) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["wavenumber".to_owned()];
    header.extend(set.labels());
    wtr.write_record(&header).map_err(csv_io)?;
    for j in 0..set.dim() {
        let mut row = Vec::with_capacity(set.len() + 1);
        row.push(set.grid().point(j).to_string());
        row.extend(set.signals().iter().map(|s| s.values[j].to_string()));
        wtr.write_record(&row).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line: 0,
            message: format!("{other:?}"),
        },
    }
}
