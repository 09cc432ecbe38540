//! Output formats: curve and time-series CSV, JSON summaries, and
//! whitespace-separated `.dat` columns for gnuplot.
//!
//! Floats are written with 17 significant digits so a CSV round trip is
//! exact and identical runs produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Curve, Grid, Vec3};
use crate::solver::Trajectory;

/// Tolerance when matching the `s` column of a CSV against a grid.
const NODE_TOLERANCE: f64 = 1e-12;

/// Seventeen significant digits in scientific notation: enough to round-trip
/// every `f64`, with a fixed layout for diffing output files.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

/// Columns `s,x1,x2,x3`, one row per node.
pub fn write_curve_csv(path: &Path, curve: &Curve) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["s", "x1", "x2", "x3"])?;
    for (s, p) in curve.grid.nodes().zip(&curve.points) {
        w.write_record([fmt_f64(s), fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a curve written by [`write_curve_csv`], checking the `s` column
/// against `grid`.
pub fn read_curve_csv(path: &Path, grid: &Grid) -> Result<Curve> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["s", "x1", "x2", "x3"] {
        return Err(Error::Config(format!(
            "{}: expected columns s,x1,x2,x3",
            path.display()
        )));
    }
    let mut points = Vec::with_capacity(grid.n_nodes);
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let vals: Vec<f64> = record
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("{}: row {}: {e}", path.display(), i + 1)))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 4 {
            return Err(Error::Config(format!(
                "{}: row {} has {} fields",
                path.display(),
                i + 1,
                vals.len()
            )));
        }
        if i >= grid.n_nodes || (vals[0] - grid.node(i)).abs() > NODE_TOLERANCE * (1.0 + grid.length) {
            return Err(Error::GridMismatch(format!(
                "{}: row {} does not match the grid",
                path.display(),
                i + 1
            )));
        }
        points.push(Vec3::new(vals[1], vals[2], vals[3]));
    }
    Curve::new(*grid, points)
}

/// Columns `t` followed by every channel of the trajectory.
pub fn write_timeseries_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend(traj.channels.keys().cloned());
    w.write_record(&header)?;
    for (i, t) in traj.times.iter().enumerate() {
        let mut row = vec![fmt_f64(*t)];
        row.extend(traj.channels.values().map(|c| fmt_f64(c[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table with a header row; all columns must have equal length.
pub fn write_table_csv(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    check_columns(header, columns)?;
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    let rows = columns.first().map_or(0, |c| c.len());
    for i in 0..rows {
        w.write_record(columns.iter().map(|c| fmt_f64(c[i])))?;
    }
    w.flush()?;
    Ok(())
}

fn check_columns(header: &[&str], columns: &[&[f64]]) -> Result<()> {
    if header.len() != columns.len() {
        return Err(Error::InvalidParameter(format!(
            "{} column names for {} columns",
            header.len(),
            columns.len()
        )));
    }
    if let Some(first) = columns.first() {
        if columns.iter().any(|c| c.len() != first.len()) {
            return Err(Error::InvalidParameter("columns differ in length".into()));
        }
    }
    Ok(())
}

/// Gnuplot data: a `#` comment header and whitespace-separated columns.
pub fn write_plot_dat(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    check_columns(header, columns)?;
    create_parent(path)?;
    let mut out = String::new();
    out.push_str("# ");
    out.push_str(&header.join(" "));
    out.push('\n');
    let rows = columns.first().map_or(0, |c| c.len());
    for i in 0..rows {
        let row: Vec<String> = columns.iter().map(|c| fmt_f64(c[i])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    create_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
