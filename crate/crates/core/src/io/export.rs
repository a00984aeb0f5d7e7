//! Scalar field export: CSV (lossless) and 16-bit PGM (grayscale preview).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::advect::GridSpec;
use crate::error::{Error, Result};
use crate::scalar_field::ScalarField;

/// CSV text: one `key=value` header row, then one row per grid line from
/// `ymin` upwards with `nx + 1` cells each. Undefined nodes are empty cells.
/// Numbers use the shortest representation that parses back to the same value.
pub fn field_to_csv(f: &ScalarField) -> String {
    let g = &f.grid;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "quantity={},nx={},ny={},xmin={:e},xmax={:e},ymin={:e},ymax={:e},t0={:e},t1={:e}",
        f.quantity, g.nx, g.ny, g.xmin, g.xmax, g.ymin, g.ymax, f.t0, f.t1
    );
    for j in 0..g.rows() {
        for i in 0..g.cols() {
            if i > 0 {
                s.push(',');
            }
            if let Some(v) = f.get(i, j) {
                let _ = write!(s, "{v:e}");
            }
        }
        s.push('\n');
    }
    s
}

pub fn export_field_csv(f: &ScalarField, path: &Path) -> Result<()> {
    fs::write(path, field_to_csv(f))?;
    Ok(())
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn field_from_csv(text: &str, path: &Path) -> Result<ScalarField> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| format_err(path, "empty file"))?;
    let mut quantity = None;
    let mut nums = std::collections::BTreeMap::new();
    for cell in header.split(',') {
        let (key, value) = cell
            .split_once('=')
            .ok_or_else(|| format_err(path, format!("header cell `{cell}` is not key=value")))?;
        if key == "quantity" {
            quantity = Some(value.to_owned());
        } else {
            let v: f64 = value
                .parse()
                .map_err(|_| format_err(path, format!("header value `{cell}` is not a number")))?;
            nums.insert(key.to_owned(), v);
        }
    }
    let get = |k: &str| {
        nums.get(k)
            .copied()
            .ok_or_else(|| format_err(path, format!("header is missing `{k}`")))
    };
    let grid = GridSpec::from_counts(
        get("xmin")?,
        get("xmax")?,
        get("ymin")?,
        get("ymax")?,
        get("nx")? as usize,
        get("ny")? as usize,
    )?;
    let mut values = Vec::with_capacity(grid.node_count());
    for (row, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != grid.cols() {
            return Err(format_err(path, format!("row {row} has {} cells, expected {}", cells.len(), grid.cols())));
        }
        for c in cells {
            if c.is_empty() {
                values.push(None);
            } else {
                let v = c
                    .parse()
                    .map_err(|_| format_err(path, format!("row {row}: `{c}` is not a number")))?;
                values.push(Some(v));
            }
        }
    }
    ScalarField::new(
        grid,
        quantity.ok_or_else(|| format_err(path, "header is missing `quantity`"))?,
        get("t0")?,
        get("t1")?,
        values,
    )
}

pub fn read_field_csv(path: &Path) -> Result<ScalarField> {
    field_from_csv(&fs::read_to_string(path)?, path)
}

/// Pixel values, top image row first (largest `y`).
///
/// Finite values map linearly from `[min, max]` onto `[0, 65535]`; undefined
/// nodes become 0, which is where the minimum lands too. FTLE fields have
/// negative values clamped to zero here and nowhere else.
pub fn field_to_pixels(f: &ScalarField) -> Result<Vec<u16>> {
    let clamp = f.quantity == "ftle";
    let prepared = |v: f64| if clamp { v.max(0.0) } else { v };
    let (lo, hi) = f
        .finite()
        .map(prepared)
        .fold(None, |acc: Option<(f64, f64)>, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
        .ok_or_else(|| Error::Export("no finite values to scale".into()))?;
    let span = hi - lo;
    let g = &f.grid;
    let mut px = Vec::with_capacity(g.node_count());
    for j in (0..g.rows()).rev() {
        for i in 0..g.cols() {
            let p = match f.get(i, j) {
                None => 0,
                Some(_) if span == 0.0 => u16::MAX,
                Some(v) => ((prepared(v) - lo) / span * 65535.0).round() as u16,
            };
            px.push(p);
        }
    }
    Ok(px)
}

/// Binary 16-bit PGM (`P5`, big-endian samples).
pub fn field_to_pgm(f: &ScalarField) -> Result<Vec<u8>> {
    let px = field_to_pixels(f)?;
    let mut out = format!("P5\n{} {}\n65535\n", f.grid.cols(), f.grid.rows()).into_bytes();
    out.reserve(px.len() * 2);
    for p in px {
        out.extend_from_slice(&p.to_be_bytes());
    }
    Ok(out)
}

pub fn export_field_pgm(f: &ScalarField, path: &Path) -> Result<()> {
    fs::write(path, field_to_pgm(f)?)?;
    Ok(())
}
