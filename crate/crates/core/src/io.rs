//! Diagnostics CSV and plain-text field snapshots.
//!
//! A snapshot is a header line `ndim n1 [n2 [n3]] h1 [h2 [h3]] t` followed by
//! one value per line, row-major, with 17 significant digits so that reading
//! it back reproduces every bit.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::scalar::Real;

pub fn write_diagnostics<W: Write>(out: W, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(DiagnosticsRecord::header())?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_diagnostics<R: Read>(input: R) -> Result<Vec<DiagnosticsRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let expected = DiagnosticsRecord::header();
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Contract(format!(
            "unexpected diagnostics header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_diagnostics_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let file = fs::File::create(path)?;
    write_diagnostics(std::io::BufWriter::new(file), records)
}

pub fn read_diagnostics_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let file = fs::File::open(path)?;
    read_diagnostics(std::io::BufReader::new(file)).map_err(|e| match e {
        Error::Contract(message) => Error::Format {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn format_snapshot<T: Real>(field: &Field<T>, t: T) -> String {
    let g = field.grid();
    let mut s = String::with_capacity(24 * (field.len() + 2));
    write!(s, "{}", g.ndim()).unwrap();
    for n in g.dims() {
        write!(s, " {n}").unwrap();
    }
    for h in g.spacing() {
        write!(s, " {:.16e}", h.as_f64()).unwrap();
    }
    writeln!(s, " {:.16e}", t.as_f64()).unwrap();
    for v in field.values() {
        writeln!(s, "{:.16e}", v.as_f64()).unwrap();
    }
    s
}

/// Inverse of [`format_snapshot`]; returns the field and its time.
pub fn parse_snapshot<T: Real>(text: &str) -> std::result::Result<(Field<T>, T), String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty snapshot")?;
    let tok: Vec<&str> = header.split_whitespace().collect();
    let ndim: usize = tok
        .first()
        .and_then(|t| t.parse().ok())
        .ok_or("header does not start with the axis count")?;
    if !(1..=3).contains(&ndim) || tok.len() != 2 + 2 * ndim {
        return Err(format!("malformed header `{header}`"));
    }
    let dims = tok[1..=ndim]
        .iter()
        .map(|t| t.parse::<usize>().map_err(|e| format!("cell count `{t}`: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let reals = tok[ndim + 1..]
        .iter()
        .map(|t| parse_real::<T>(t))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let (spacing, t) = reals.split_at(ndim);
    let grid = Grid::with_spacing(&dims, spacing).map_err(|e| e.to_string())?;
    let mut values = Vec::with_capacity(grid.len());
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        values.push(parse_real::<T>(line).map_err(|e| format!("value line {}: {e}", i + 2))?);
    }
    if values.len() != grid.len() {
        return Err(format!("expected {} values, found {}", grid.len(), values.len()));
    }
    let field = Field::from_values(&Arc::new(grid), values).map_err(|e| e.to_string())?;
    Ok((field, t[0]))
}

fn parse_real<T: Real>(tok: &str) -> std::result::Result<T, String> {
    let x: f64 = tok.parse().map_err(|e| format!("`{tok}`: {e}"))?;
    T::from_f64(x).ok_or_else(|| format!("`{tok}` does not fit the scalar type"))
}

pub fn write_snapshot<T: Real>(path: &Path, field: &Field<T>, t: T) -> Result<()> {
    fs::write(path, format_snapshot(field, t))?;
    Ok(())
}

pub fn read_snapshot<T: Real>(path: &Path) -> Result<(Field<T>, T)> {
    let text = fs::read_to_string(path)?;
    parse_snapshot(&text).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn record(n: usize, gap: Option<f64>) -> DiagnosticsRecord {
        DiagnosticsRecord {
            n,
            t: 0.1 * n as f64,
            mass_u: 1.0 / 3.0,
            linf_u: 2.0,
            linf_z: 1.1,
            linf_v: 1.2,
            l2_z_sq: 0.7,
            incr_z_sq: 1e-17,
            grad_z_sq: 0.0,
            energy: -0.25,
            min_u: -3.5e-300,
            min_z: 0.1,
            picard_iterations: 7,
            cross_variant_gap: gap,
        }
    }

    #[test]
    fn csv_round_trip() {
        let recs = vec![record(0, None), record(1, Some(2.0f64.sqrt()))];
        let mut buf = Vec::new();
        write_diagnostics(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), DiagnosticsRecord::header().join(","));
        assert_eq!(read_diagnostics(&buf[..]).unwrap(), recs);
    }

    #[test]
    fn empty_csv_still_has_header() {
        let mut buf = Vec::new();
        write_diagnostics(&mut buf, &[]).unwrap();
        assert!(read_diagnostics(&buf[..]).unwrap().is_empty());
    }

    #[test]
    fn foreign_header_is_rejected() {
        assert!(read_diagnostics("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let g = build_grid(&[3, 5, 2], &[1.0, 0.7, 2.9]).unwrap();
        let f = Field::from_fn(&g, |x: &[f64]| (x[0] * 17.3).sin() * 1e-7 + x[1] / 3.0 + x[2].exp());
        let text = format_snapshot(&f, 0.3);
        assert!(text.starts_with("3 3 5 2 "));
        let (back, t) = parse_snapshot::<f64>(&text).unwrap();
        assert_eq!(t, 0.3);
        assert_eq!(back.grid().spacing(), g.spacing());
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn snapshot_round_trip_f32() {
        let g = build_grid(&[7], &[1.3f32]).unwrap();
        let f = Field::from_fn(&g, |x: &[f32]| x[0].sqrt() / 3.0);
        let (back, t) = parse_snapshot::<f32>(&format_snapshot(&f, 1.1f32)).unwrap();
        assert_eq!(t, 1.1f32);
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn malformed_snapshots() {
        assert!(parse_snapshot::<f64>("").is_err());
        assert!(parse_snapshot::<f64>("2 3 0.5 0.5 0\n").is_err());
        assert!(parse_snapshot::<f64>("1 2 0.5 0\n1.0\n").is_err());
        assert!(parse_snapshot::<f64>("1 2 0.5 0\n1.0\nx\n").is_err());
    }
}
