//! CSV and JSON exchange formats for joint spectra.
//!
//! CSV: a `# grid ...` comment with the grid metadata as `key=value` pairs,
//! a column header, then one row per matrix entry in row-major order
//! (`i,j,re,im` for amplitudes, `i,j,value` for intensities). Other `#`
//! lines are ignored on read.
//!
//! JSON: `{"grid": {...}, "amplitude": [[[re, im], ...], ...]}` or
//! `{"grid": {...}, "intensity": [[...], ...]}`. Floats round-trip exactly.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::JointSpectrum;
use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, Matrix, RealMatrix};
use crate::model::FrequencyGrid;

const GRID_PREFIX: &str = "# grid ";

fn grid_comment(grid: &FrequencyGrid) -> String {
    format!(
        "{GRID_PREFIX}signal_center={} idler_center={} signal_span={} idler_span={} n_signal={} n_idler={}",
        grid.signal_center(),
        grid.idler_center(),
        grid.signal_span(),
        grid.idler_span(),
        grid.n_signal(),
        grid.n_idler()
    )
}

fn parse_grid_comment(line: &str) -> Result<FrequencyGrid> {
    let mut values = std::collections::HashMap::new();
    for pair in line.trim_start_matches(GRID_PREFIX).split_whitespace() {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("malformed grid field '{pair}'")))?;
        values.insert(k, v);
    }
    let get = |k: &str| -> Result<&str> {
        values
            .get(k)
            .copied()
            .ok_or_else(|| Error::Parse(format!("grid header lacks '{k}'")))
    };
    let f = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|e| Error::Parse(format!("grid {k}: {e}"))) };
    let n = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|e| Error::Parse(format!("grid {k}: {e}"))) };
    FrequencyGrid::new(
        f("signal_center")?,
        f("idler_center")?,
        f("signal_span")?,
        f("idler_span")?,
        n("n_signal")?,
        n("n_idler")?,
    )
}

/// Splits a CSV document into its grid and the remaining table text.
fn read_table<R: BufRead>(reader: R) -> Result<(FrequencyGrid, String)> {
    let mut grid = None;
    let mut body = String::new();
    for line in reader.lines() {
        let line = line?;
        if line.starts_with(GRID_PREFIX) {
            grid = Some(parse_grid_comment(&line)?);
        } else if !line.starts_with('#') {
            body.push_str(&line);
            body.push('\n');
        }
    }
    let grid = grid.ok_or_else(|| Error::Parse("missing '# grid' header line".into()))?;
    Ok((grid, body))
}

fn fill<T: Clone>(grid: &FrequencyGrid, zero: T, entries: Vec<(usize, usize, T)>) -> Result<Matrix<T>> {
    let (rows, cols) = (grid.n_signal(), grid.n_idler());
    if entries.len() != rows * cols {
        return Err(Error::Parse(format!("expected {} entries, found {}", rows * cols, entries.len())));
    }
    let mut m = Matrix::filled(rows, cols, zero);
    for (i, j, v) in entries {
        if i >= rows || j >= cols {
            return Err(Error::Parse(format!("entry ({i}, {j}) outside the {rows}x{cols} grid")));
        }
        m.set(i, j, v);
    }
    Ok(m)
}

pub fn write_jsa_csv<W: Write>(jsa: &JointSpectrum, mut writer: W) -> Result<()> {
    writeln!(writer, "{}", grid_comment(jsa.grid()))?;
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["i", "j", "re", "im"])?;
    let amp = jsa.amplitude();
    for i in 0..amp.rows() {
        for (j, z) in amp.row(i).iter().enumerate() {
            csv.write_record([i.to_string(), j.to_string(), z.re.to_string(), z.im.to_string()])?;
        }
    }
    csv.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct AmplitudeRow {
    i: usize,
    j: usize,
    re: f64,
    im: f64,
}

#[derive(Deserialize)]
struct IntensityRow {
    i: usize,
    j: usize,
    value: f64,
}

pub fn read_jsa_csv<R: BufRead>(reader: R) -> Result<JointSpectrum> {
    let (grid, body) = read_table(reader)?;
    let mut entries = Vec::new();
    for row in csv::Reader::from_reader(body.as_bytes()).deserialize() {
        let AmplitudeRow { i, j, re, im } = row?;
        entries.push((i, j, Complex64::new(re, im)));
    }
    let amp = fill(&grid, Complex64::new(0.0, 0.0), entries)?;
    JointSpectrum::from_normalized(grid, amp)
}

pub fn write_jsi_csv<W: Write>(grid: &FrequencyGrid, jsi: &RealMatrix, mut writer: W) -> Result<()> {
    check(grid, jsi.shape())?;
    writeln!(writer, "{}", grid_comment(grid))?;
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["i", "j", "value"])?;
    for i in 0..jsi.rows() {
        for (j, v) in jsi.row(i).iter().enumerate() {
            csv.write_record([i.to_string(), j.to_string(), v.to_string()])?;
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn read_jsi_csv<R: BufRead>(reader: R) -> Result<(FrequencyGrid, RealMatrix)> {
    let (grid, body) = read_table(reader)?;
    let mut entries = Vec::new();
    for row in csv::Reader::from_reader(body.as_bytes()).deserialize() {
        let IntensityRow { i, j, value } = row?;
        entries.push((i, j, value));
    }
    let m = fill(&grid, 0.0, entries)?;
    Ok((grid, m))
}

fn check(grid: &FrequencyGrid, shape: (usize, usize)) -> Result<()> {
    if shape != (grid.n_signal(), grid.n_idler()) {
        return Err(Error::shape("spectrum export", "matrix does not match the grid"));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct AmplitudeDoc {
    grid: FrequencyGrid,
    amplitude: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct IntensityDoc {
    grid: FrequencyGrid,
    intensity: Vec<Vec<f64>>,
}

fn nested<T: Clone, U>(m: &Matrix<T>, f: impl Fn(&T) -> U) -> Vec<Vec<U>> {
    (0..m.rows()).map(|i| m.row(i).iter().map(&f).collect()).collect()
}

fn flatten<T>(grid: &FrequencyGrid, rows: Vec<Vec<T>>) -> Result<Matrix<T>>
where
    T: Clone,
{
    if rows.len() != grid.n_signal() || rows.iter().any(|r| r.len() != grid.n_idler()) {
        return Err(Error::Parse("nested array shape does not match the grid".into()));
    }
    Matrix::from_vec(grid.n_signal(), grid.n_idler(), rows.into_iter().flatten().collect())
}

pub fn write_jsa_json<W: Write>(jsa: &JointSpectrum, writer: W) -> Result<()> {
    let doc = AmplitudeDoc {
        grid: jsa.grid().clone(),
        amplitude: nested(jsa.amplitude(), |z| [z.re, z.im]),
    };
    serde_json::to_writer(writer, &doc)?;
    Ok(())
}

pub fn read_jsa_json<R: std::io::Read>(reader: R) -> Result<JointSpectrum> {
    let doc: AmplitudeDoc = serde_json::from_reader(reader)?;
    let amp: ComplexMatrix = flatten(
        &doc.grid,
        doc.amplitude
            .into_iter()
            .map(|r| r.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
            .collect(),
    )?;
    JointSpectrum::from_normalized(doc.grid, amp)
}

pub fn write_jsi_json<W: Write>(grid: &FrequencyGrid, jsi: &RealMatrix, writer: W) -> Result<()> {
    check(grid, jsi.shape())?;
    let doc = IntensityDoc {
        grid: grid.clone(),
        intensity: nested(jsi, |v| *v),
    };
    serde_json::to_writer(writer, &doc)?;
    Ok(())
}

pub fn read_jsi_json<R: std::io::Read>(reader: R) -> Result<(FrequencyGrid, RealMatrix)> {
    let doc: IntensityDoc = serde_json::from_reader(reader)?;
    let m = flatten(&doc.grid, doc.intensity)?;
    Ok((doc.grid, m))
}
