//! Training records and the `x,y,dy_dx` dataset interchange format.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;

/// One training record: an input, its target value and optionally the
/// target derivative with respect to the input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSample {
    pub x: f64,
    pub y: f64,
    pub dy_dx: Option<f64>,
}

impl DualSample {
    pub fn new(x: f64, y: f64, dy_dx: f64) -> Self {
        Self {
            x,
            y,
            dy_dx: Some(dy_dx),
        }
    }

    pub fn value_only(x: f64, y: f64) -> Self {
        Self { x, y, dy_dx: None }
    }
}

/// True when every sample carries a derivative label.
pub fn has_derivatives(data: &[DualSample]) -> bool {
    data.iter().all(|s| s.dy_dx.is_some())
}

/// Writes `x,y,dy_dx`; the derivative column is dropped when no sample has one.
/// Numbers use Rust's shortest round-trip formatting, so reading back is exact.
pub fn write_dataset_csv(path: &Path, data: &[DualSample]) -> Result<()> {
    let with_dy = data.iter().any(|s| s.dy_dx.is_some());
    let mut out = Vec::with_capacity(data.len() * 48);
    if with_dy {
        out.extend_from_slice(b"x,y,dy_dx\n");
    } else {
        out.extend_from_slice(b"x,y\n");
    }
    for s in data {
        match (with_dy, s.dy_dx) {
            (true, Some(d)) => writeln!(out, "{},{},{}", s.x, s.y, d),
            (true, None) => writeln!(out, "{},{},", s.x, s.y),
            (false, _) => writeln!(out, "{},{}", s.x, s.y),
        }
        .expect("write to Vec");
    }
    write_atomic(path, &out)
}

pub fn read_dataset_csv(path: &Path) -> Result<Vec<DualSample>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (ix, iy) = match (col("x"), col("y")) {
        (Some(ix), Some(iy)) => (ix, iy),
        _ => {
            return Err(Error::InvalidData(format!(
                "{}: header must contain `x` and `y`",
                path.display()
            )))
        }
    };
    let idy = col("dy_dx");

    let parse = |rec: &csv::StringRecord, i: usize, line: usize| -> Result<f64> {
        let field = rec.get(i).unwrap_or("").trim();
        field
            .parse::<f64>()
            .map_err(|_| Error::InvalidData(format!("line {line}: cannot parse `{field}` as a number")))
    };

    let mut data = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let x = parse(&rec, ix, line)?;
        let y = parse(&rec, iy, line)?;
        let dy_dx = match idy {
            Some(i) if !rec.get(i).unwrap_or("").trim().is_empty() => Some(parse(&rec, i, line)?),
            _ => None,
        };
        data.push(DualSample { x, y, dy_dx });
    }
    Ok(data)
}
