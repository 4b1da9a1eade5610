//! File formats: measurement CSV and the ground-truth sidecar.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces every value bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BranchSpec, MeasurementSample, MeasurementSeries, Mode};

pub const MEASUREMENT_HEADER: [&str; 5] = ["t", "v_in", "v_out", "i_in", "i_out"];

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn write_measurements<W: Write>(series: &MeasurementSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(MEASUREMENT_HEADER).map_err(csv_err)?;
    for s in series.samples() {
        w.write_record([
            s.t.to_string(),
            s.v_in.to_string(),
            s.v_out.to_string(),
            s.i_in.to_string(),
            s.i_out.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_measurements<R: Read>(reader: R, dt_s: f64) -> Result<MeasurementSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Format(format!("measurement header: {e}")))?;
    if header.iter().ne(MEASUREMENT_HEADER) {
        return Err(Error::Format(format!(
            "measurement header must be `{}`, got `{}`",
            MEASUREMENT_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut samples = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Parse { row, col: 0, msg: e.to_string() })?;
        if record.len() != MEASUREMENT_HEADER.len() {
            return Err(Error::Parse {
                row,
                col: record.len().min(5) + 1,
                msg: format!("expected 5 cells, got {}", record.len()),
            });
        }
        let t: u64 = record[0].parse().map_err(|_| Error::Parse {
            row,
            col: 1,
            msg: format!("step index `{}` is not a nonnegative integer", &record[0]),
        })?;
        let mut vals = [0.0f64; 4];
        for (c, slot) in vals.iter_mut().enumerate() {
            let cell = &record[c + 1];
            *slot = cell.parse().map_err(|_| Error::Parse {
                row,
                col: c + 2,
                msg: format!("non-numeric `{cell}` in column `{}`", MEASUREMENT_HEADER[c + 1]),
            })?;
        }
        samples.push(MeasurementSample {
            t,
            v_in: vals[0],
            v_out: vals[1],
            i_in: vals[2],
            i_out: vals[3],
        });
    }
    MeasurementSeries::new(dt_s, samples)
}

pub fn load_measurements(path: impl AsRef<Path>, dt_s: f64) -> Result<MeasurementSeries> {
    read_measurements(std::fs::File::open(path)?, dt_s)
}

pub fn save_measurements(series: &MeasurementSeries, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_measurements(series, std::io::BufWriter::new(file))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTruth {
    pub length_m: f64,
    pub r_ohm: f64,
    pub x_ohm: f64,
}

/// Ground truth written next to simulated measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub z_true_ohm: f64,
    pub segments: Vec<SegmentTruth>,
    pub seed: u64,
    pub mode: Mode,
}

impl GroundTruth {
    pub fn from_branch(branch: &BranchSpec, seed: u64) -> Self {
        Self {
            z_true_ohm: branch.z_true(),
            segments: branch
                .segments()
                .iter()
                .map(|s| SegmentTruth {
                    length_m: s.length_m,
                    r_ohm: s.z.re,
                    x_ohm: s.z.im,
                })
                .collect(),
            seed,
            mode: branch.mode(),
        }
    }
}
