//! CSV tables and text files. Floats are written with Rust's shortest
//! round-trip formatting, so reading a table back gives the same bits.

use std::fs::File;
use std::path::Path;

use vpme_core::scheme::IterationRecord;
use vpme_core::{DensityHistory, FieldHistory, TabulatedGrid};

use crate::error::{CliError, Result};

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Reader::from_reader(file))
}

fn row<const N: usize>(w: &mut csv::Writer<File>, path: &Path, fields: [String; N]) -> Result<()> {
    w.write_record(&fields).map_err(|e| CliError::format(path, e))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn check_header(r: &mut csv::Reader<File>, path: &Path, expected: &[&str]) -> Result<()> {
    let header = r.headers().map_err(|e| CliError::format(path, e))?;
    if header.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(CliError::format(
            path,
            format!("expected header {}, found {}", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(())
}

fn number(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| CliError::format(path, format!("line {line}: not a number: {field:?}")))
}

/// `t,x,Ebar,Etilde,E`, one row per `(time node, x node)`.
pub fn write_fields(path: &Path, history: &FieldHistory) -> Result<()> {
    let mut w = writer(path)?;
    row(&mut w, path, ["t", "x", "Ebar", "Etilde", "E"].map(String::from))?;
    let grid = history.grid();
    for (i, t) in history.time().times().enumerate() {
        let slice = &history.slices()[i];
        let total = history.total(i);
        for (j, x) in grid.nodes().enumerate() {
            row(
                &mut w,
                path,
                [t, x, slice.ebar[j], slice.etilde[j], total[j]].map(|v| v.to_string()),
            )?;
        }
    }
    finish(w, path)
}

/// `t,x,rho`, one row per `(time node, x node)`.
pub fn write_density(path: &Path, density: &DensityHistory) -> Result<()> {
    let mut w = writer(path)?;
    row(&mut w, path, ["t", "x", "rho"].map(String::from))?;
    let grid = density.grid();
    for (i, t) in density.time().times().enumerate() {
        for (j, x) in grid.nodes().enumerate() {
            row(&mut w, path, [t, x, density.slice(i)[j]].map(|v| v.to_string()))?;
        }
    }
    finish(w, path)
}

/// `n,norm,delta,ratio`, one row per pass; `ratio` is empty on the first.
pub fn write_norms(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut w = writer(path)?;
    row(&mut w, path, ["n", "norm", "delta", "ratio"].map(String::from))?;
    for r in records {
        row(
            &mut w,
            path,
            [
                r.n.to_string(),
                r.norm.to_string(),
                r.delta.to_string(),
                r.ratio.map(|q| q.to_string()).unwrap_or_default(),
            ],
        )?;
    }
    finish(w, path)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// `(t, sup_x |E(t, x)|)` per time node of a `fields.csv` table.
pub fn read_field_sups(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = reader(path)?;
    check_header(&mut r, path, &["t", "x", "Ebar", "Etilde", "E"])?;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::format(path, e))?;
        let line = k + 2;
        if rec.len() != 5 {
            return Err(CliError::format(path, format!("line {line}: expected 5 fields")));
        }
        let t = number(path, line, &rec[0])?;
        let e = number(path, line, &rec[4])?.abs();
        match out.last_mut() {
            Some(last) if last.0 == t => last.1 = last.1.max(e),
            _ => out.push((t, e)),
        }
    }
    if out.is_empty() {
        return Err(CliError::format(path, "no data rows"));
    }
    Ok(out)
}

/// Read a tabulated datum from `x,v,f` rows covering a full grid with
/// `x_i = i / nx`.
pub fn read_tabulated(path: &Path) -> Result<TabulatedGrid> {
    let mut r = reader(path)?;
    check_header(&mut r, path, &["x", "v", "f"])?;
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::format(path, e))?;
        let line = k + 2;
        if rec.len() != 3 {
            return Err(CliError::format(path, format!("line {line}: expected 3 fields")));
        }
        rows.push((number(path, line, &rec[0])?, number(path, line, &rec[1])?, number(path, line, &rec[2])?));
    }
    let unique = |pick: fn(&(f64, f64, f64)) -> f64| {
        let mut v: Vec<f64> = rows.iter().map(pick).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let xs = unique(|r| r.0);
    let vs = unique(|r| r.1);
    let nx = xs.len();
    if xs.iter().enumerate().any(|(i, &x)| (x - i as f64 / nx as f64).abs() > 1e-9) {
        return Err(CliError::format(path, format!("x nodes must be i/{nx} for i = 0..{nx}")));
    }
    let mut values = vec![f64::NAN; nx * vs.len()];
    for &(x, v, f) in &rows {
        let ix = ((x * nx as f64).round() as usize).min(nx - 1);
        let iv = vs.partition_point(|&w| w < v);
        values[iv * nx + ix] = f;
    }
    if values.iter().any(|f| f.is_nan()) || rows.len() != values.len() {
        return Err(CliError::format(path, "rows do not form a complete x-v grid"));
    }
    TabulatedGrid::new(nx, vs, values).map_err(|e| CliError::format(path, e))
}
