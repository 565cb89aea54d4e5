//! CSV input for scalar-on-function data.
//!
//! The x file has a header of observation times followed by one row per
//! subject; the y file has a header followed by one response per row, in the
//! same order. Rows with a missing cell in either file are dropped.

use std::fs::File;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use super::report::format_float;
use crate::basis::Domain;
use crate::datagen::{Dataset, Response, Subject};
use crate::error::{Error, Result};
use crate::functionalize::LongitudinalSample;

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    /// All usable subjects, in file order, under `train`; `test` is empty.
    pub dataset: Dataset,
    /// Line numbers (in the x file) of rows dropped for missing values.
    pub dropped_lines: Vec<usize>,
}

impl LoadedData {
    pub fn dropped(&self) -> usize {
        self.dropped_lines.len()
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || ["na", "nan", "n/a", "null"].iter().any(|m| c.eq_ignore_ascii_case(m))
}

enum Cell {
    Value(f64),
    Missing,
}

fn parse_cell(cell: &str, path: &Path, line: usize) -> Result<Cell> {
    if is_missing(cell) {
        return Ok(Cell::Missing);
    }
    match cell.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Cell::Value(v)),
        _ => Err(parse_err(path, line, format!("not a finite number: {cell:?}"))),
    }
}

/// Reads `(line, record)` pairs, header included.
fn read_records(path: &Path) -> Result<Vec<(usize, StringRecord)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(out.len() + 1, |p| p.line() as usize);
        out.push((line, rec));
    }
    Ok(out)
}

pub fn load_sonf_csv(x_path: &Path, y_path: &Path) -> Result<LoadedData> {
    let x_rows = read_records(x_path)?;
    let y_rows = read_records(y_path)?;
    let Some(((header_line, header), x_body)) = x_rows.split_first() else {
        return Err(parse_err(x_path, 1, "file is empty"));
    };
    let Some((_, y_body)) = y_rows.split_first() else {
        return Err(parse_err(y_path, 1, "file is empty"));
    };

    let mut times = Vec::with_capacity(header.len());
    for cell in header.iter() {
        match parse_cell(cell, x_path, *header_line)? {
            Cell::Value(t) => times.push(t),
            Cell::Missing => return Err(parse_err(x_path, *header_line, "empty observation time")),
        }
    }
    let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let domain = Domain::new(lo, hi)
        .map_err(|_| parse_err(x_path, *header_line, "need at least two distinct observation times"))?;

    if x_body.len() != y_body.len() {
        let (path, line) = if x_body.len() > y_body.len() {
            (x_path, x_body[y_body.len()].0)
        } else {
            (y_path, y_body[x_body.len()].0)
        };
        return Err(parse_err(
            path,
            line,
            format!("x has {} data rows but y has {}", x_body.len(), y_body.len()),
        ));
    }

    let mut subjects = Vec::with_capacity(x_body.len());
    let mut dropped_lines = Vec::new();
    for ((x_line, x_rec), (y_line, y_rec)) in x_body.iter().zip(y_body) {
        if x_rec.len() != times.len() {
            return Err(parse_err(
                x_path,
                *x_line,
                format!("expected {} cells, found {}", times.len(), x_rec.len()),
            ));
        }
        if y_rec.len() != 1 {
            return Err(parse_err(
                y_path,
                *y_line,
                format!("expected one response, found {} cells", y_rec.len()),
            ));
        }
        let mut values = Vec::with_capacity(times.len());
        let mut missing = false;
        for cell in x_rec.iter() {
            match parse_cell(cell, x_path, *x_line)? {
                Cell::Value(v) => values.push(v),
                Cell::Missing => missing = true,
            }
        }
        let y = match parse_cell(&y_rec[0], y_path, *y_line)? {
            Cell::Value(v) => Some(v),
            Cell::Missing => None,
        };
        match (missing, y) {
            (false, Some(y)) => subjects.push(Subject {
                x: LongitudinalSample::new(times.clone(), values)?,
                response: Response::Scalar(y),
                signal: None,
            }),
            _ => dropped_lines.push(*x_line),
        }
    }
    if !dropped_lines.is_empty() {
        log::warn!(
            "{}: dropped {} row(s) with missing values (lines {:?})",
            x_path.display(),
            dropped_lines.len(),
            dropped_lines
        );
    }
    if subjects.is_empty() {
        return Err(parse_err(x_path, *header_line, "no complete rows"));
    }
    Ok(LoadedData {
        dataset: Dataset {
            train: subjects,
            test: Vec::new(),
            domain,
            response_domain: domain,
        },
        dropped_lines,
    })
}

/// Writes train then test subjects in the loader's schema. Every subject must
/// have the same observation times and a scalar response.
pub fn write_sonf_csv(dataset: &Dataset, x_path: &Path, y_path: &Path) -> Result<()> {
    let subjects: Vec<&Subject> = dataset.train.iter().chain(&dataset.test).collect();
    let first = subjects
        .first()
        .ok_or_else(|| Error::invalid("dataset has no subjects"))?;
    let times = first.x.times();

    let open = |path: &Path| -> Result<csv::Writer<File>> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(WriterBuilder::new().from_writer(file))
    };
    let csv_err = |path: &Path, e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::invalid(format!("{}: {other:?}", path.display())),
    };

    let mut xw = open(x_path)?;
    let mut yw = open(y_path)?;
    xw.write_record(times.iter().map(|t| format_float(*t)))
        .map_err(|e| csv_err(x_path, e))?;
    yw.write_record(["y"]).map_err(|e| csv_err(y_path, e))?;
    for s in subjects {
        if s.x.times() != times {
            return Err(Error::invalid("subjects do not share observation times"));
        }
        let Response::Scalar(y) = s.response else {
            return Err(Error::invalid("only scalar responses can be written"));
        };
        xw.write_record(s.x.values().iter().map(|v| format_float(*v)))
            .map_err(|e| csv_err(x_path, e))?;
        yw.write_record([format_float(y)]).map_err(|e| csv_err(y_path, e))?;
    }
    xw.flush().map_err(|e| Error::io(x_path, e))?;
    yw.flush().map_err(|e| Error::io(y_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use tempfile::TempDir;

    fn files(x: &str, y: &str) -> (TempDir, std::path::PathBuf, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let xp = dir.path().join("x.csv");
        let yp = dir.path().join("y.csv");
        fs::write(&xp, x).unwrap();
        fs::write(&yp, y).unwrap();
        (dir, xp, yp)
    }

    #[test]
    fn toy_fixture() {
        let (_d, x, y) = files("900,902,904\n1.0,2.0,3.0\n4.0,5.0,6.5\n", "octane\n85.3\n88.1\n");
        let l = load_sonf_csv(&x, &y).unwrap();
        assert_eq!(l.dataset.train.len(), 2);
        assert_eq!(l.dataset.train[0].x.len(), 3);
        assert_eq!(l.dataset.train[1].x.values(), &[4.0, 5.0, 6.5]);
        assert_eq!(l.dataset.train[1].response, Response::Scalar(88.1));
        assert_eq!(l.dataset.domain, Domain::new(900.0, 904.0).unwrap());
        assert_eq!(l.dropped(), 0);
    }

    #[test]
    fn missing_rows_dropped() {
        let (_d, x, y) = files(
            "1,2,3\n1,2,3\n4,NA,6\n7,8,9\n1,1,1\n",
            "y\n1\n2\n3\n\"\"\n",
        );
        let l = load_sonf_csv(&x, &y).unwrap();
        assert_eq!(l.dataset.train.len(), 2);
        assert_eq!(l.dropped_lines, vec![3, 5]);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let check = |x: &str, y: &str| {
            let (_d, xp, yp) = files(x, y);
            match load_sonf_csv(&xp, &yp) {
                Err(Error::Parse { path, line, .. }) => (path == xp, line),
                other => panic!("expected parse error, got {other:?}"),
            }
        };
        assert_eq!(check("1,2\n1,2\n3\n", "y\n1\n2\n"), (true, 3));
        assert_eq!(check("1,2\n1,abc\n", "y\n1\n"), (true, 2));
        assert_eq!(check("1,t\n1,2\n", "y\n1\n"), (true, 1));
        assert_eq!(check("1,2\n1,2\n1,2\n", "y\n1\n"), (true, 3));
        assert_eq!(check("1,2\n1,2\n", "y\n1\n2\n"), (false, 3));
        assert_eq!(check("1,2\n1,2\n", "y\nfoo\n"), (false, 2));
        assert_eq!(check("1,2\n1,2\n", "y\n1,2\n"), (false, 2));
        assert_eq!(check("3,3\n1,2\n", "y\n1\n"), (true, 1));
    }

    #[test]
    fn round_trip() {
        let (d, x, y) = files(
            "0.1,0.25,0.7,1.3\n1.5,-2.25,3.0000000000000004,1e-300\n0.1,0.2,0.3,0.4\n",
            "y\n0.3333333333333333\n-7\n",
        );
        let first = load_sonf_csv(&x, &y).unwrap();
        let (x2, y2) = (d.path().join("x2.csv"), d.path().join("y2.csv"));
        write_sonf_csv(&first.dataset, &x2, &y2).unwrap();
        let second = load_sonf_csv(&x2, &y2).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn missing_file() {
        let (_d, x, _) = files("1,2\n", "y\n");
        assert!(matches!(
            load_sonf_csv(&x, Path::new("/nonexistent/y.csv")),
            Err(Error::Io { .. })
        ));
    }
}
