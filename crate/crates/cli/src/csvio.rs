//! Labeled panel CSV.
//!
//! Layout: the first row holds a corner cell followed by one label per time
//! step; every following row holds a series identifier followed by that
//! series' values. Empty cells and `NaN` are missing. Numbers are written
//! with Rust's shortest round-trip formatting, and missing entries are
//! written as empty cells, so `write(read(f))` reproduces values, mask, and
//! labels exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use notmf_core::{MaskedMatrix, MissingRule};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPanel {
    pub corner: String,
    pub series: Vec<String>,
    pub times: Vec<String>,
    pub data: MaskedMatrix,
}

/// A time label that reads as a fractional number is almost certainly a
/// data row, which means the header is missing.
fn looks_like_value(label: &str) -> bool {
    let digits = label.strip_prefix('-').unwrap_or(label);
    let integer = !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit());
    !integer && label.parse::<f64>().is_ok()
}

pub fn read_panel<R: Read>(
    input: R,
    origin: &Path,
    zero_is_missing: bool,
) -> CliResult<LabeledPanel> {
    let parse_err = |line: u64, column: usize, message: String| CliError::Parse {
        path: origin.to_path_buf(),
        line,
        column,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| parse_err(1, 1, e.to_string()))?,
        None => return Err(parse_err(1, 1, "empty file, expected a header row".into())),
    };
    if header.len() < 2 {
        return Err(parse_err(
            1,
            1,
            "header needs a corner cell and at least one time label".into(),
        ));
    }
    let corner = header[0].to_string();
    let times: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    for (j, label) in times.iter().enumerate() {
        if label.trim().is_empty() {
            return Err(parse_err(
                1,
                j + 2,
                "empty time label; is the header row missing?".into(),
            ));
        }
        if looks_like_value(label) {
            return Err(parse_err(
                1,
                j + 2,
                format!("time label {label:?} looks like a data value; is the header row missing?"),
            ));
        }
    }

    let width = times.len();
    let mut series = Vec::new();
    let mut rows = Vec::new();
    let mut mask = Vec::new();
    for (idx, rec) in records.enumerate() {
        let line = idx as u64 + 2;
        let rec = rec.map_err(|e| parse_err(line, 1, e.to_string()))?;
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != width + 1 {
            return Err(parse_err(
                line,
                rec.len().min(width + 1),
                format!("expected {} cells, found {}", width + 1, rec.len()),
            ));
        }
        series.push(rec[0].to_string());
        let mut values = Vec::with_capacity(width);
        let mut seen = Vec::with_capacity(width);
        for (j, cell) in rec.iter().skip(1).enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                values.push(0.0);
                seen.push(false);
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, j + 2, format!("not a number: {cell:?}")))?;
            if v.is_infinite() {
                return Err(parse_err(line, j + 2, format!("infinite value: {cell:?}")));
            }
            let observed = !v.is_nan() && !(zero_is_missing && v == 0.0);
            values.push(if observed { v } else { 0.0 });
            seen.push(observed);
        }
        rows.push(values);
        mask.push(seen);
    }
    if rows.is_empty() {
        return Err(parse_err(2, 1, "no series rows after the header".into()));
    }
    let data = MaskedMatrix::from_rows(&rows, MissingRule::Explicit(mask))?;
    Ok(LabeledPanel {
        corner,
        series,
        times,
        data,
    })
}

pub fn load_csv(path: &Path, zero_is_missing: bool) -> CliResult<LabeledPanel> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_panel(file, path, zero_is_missing)
}

/// Writes `values` with labels; entries where `mask` is false become empty
/// cells.
pub fn write_panel<W: Write>(
    out: W,
    corner: &str,
    series: &[String],
    times: &[String],
    values: &DMatrix<f64>,
    mask: Option<&DMatrix<bool>>,
) -> std::io::Result<()> {
    assert_eq!(
        values.shape(),
        (series.len(), times.len()),
        "labels do not match values"
    );
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    let mut header = vec![corner.to_string()];
    header.extend(times.iter().cloned());
    w.write_record(&header)?;
    for (i, name) in series.iter().enumerate() {
        let mut row = vec![name.clone()];
        for t in 0..times.len() {
            let keep = mask.is_none_or(|m| m[(i, t)]);
            row.push(if keep {
                format!("{}", values[(i, t)])
            } else {
                String::new()
            });
        }
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn save_panel(path: &Path, panel: &LabeledPanel) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_panel(
        std::io::BufWriter::new(file),
        &panel.corner,
        &panel.series,
        &panel.times,
        panel.data.values(),
        Some(panel.data.mask()),
    )
    .map_err(|e| CliError::io(path, e))
}
