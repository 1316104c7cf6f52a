//! Minimal CSV plumbing: comma-separated, UTF-8, '.' decimal, header
//! mandatory. Floats are written with the shortest representation that
//! parses back to the identical bits, so files round-trip exactly.

use crate::deconv::Dataset;
use crate::error::{Error, Result};
use std::fs;
use std::path::Path;

/// Shortest round-trip decimal form of `x`.
pub fn format_f64(x: f64) -> String {
    format!("{x}")
}

pub fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("not a number: {s:?}"),
    })
}

/// Writes via a temp file in the same directory plus rename, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp-{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads an observations file with mandatory header `y,z`.
pub fn read_yz_csv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_yz_csv(&text)
}

pub fn parse_yz_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "y,z" => {}
        Some((_, header)) => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header \"y,z\", got {:?}", header.trim()),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty file".into(),
            })
        }
    }
    let mut y = Vec::new();
    let mut z = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut parts = trimmed.split(',');
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected two comma-separated fields, got {trimmed:?}"),
                })
            }
        };
        y.push(parse_f64(a, line_no)?);
        z.push(parse_f64(b, line_no)?);
    }
    if z.is_empty() {
        return Err(Error::Parse {
            line: 2,
            msg: "no data rows".into(),
        });
    }
    Dataset::new(Some(y), z)
}

pub fn yz_csv_string(y: &[f64], z: &[f64]) -> String {
    let mut out = String::from("y,z\n");
    for (a, b) in y.iter().zip(z) {
        out.push_str(&format_f64(*a));
        out.push(',');
        out.push_str(&format_f64(*b));
        out.push('\n');
    }
    out
}

/// Single-column CSV with a header.
pub fn column_csv_string(header: &str, values: &[f64]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for v in values {
        out.push_str(&format_f64(*v));
        out.push('\n');
    }
    out
}
