//! CSV input and output.
//!
//! Input: comma separated, '.' decimal point, UTF-8. The first row is a
//! header when any of its cells is neither a number nor a missing-value
//! token. Columns are chosen by header name or by 1-based position.

use std::io::Write;
use std::path::Path;

use skewgof::Sample;

use crate::error::{CliError, CliResult};

const MISSING: [&str; 7] = ["", "na", "n/a", "nan", ".", "?", "null"];

fn is_missing(cell: &str) -> bool {
    MISSING.contains(&cell.to_ascii_lowercase().as_str())
}

#[derive(Debug, Clone, Default)]
pub struct ReadOptions {
    /// Column names or 1-based positions; all columns when empty.
    pub columns: Vec<String>,
    /// Keep only rows whose column equals the value (`name=value`).
    pub filter: Option<(String, String)>,
    pub drop_missing: bool,
}

/// Numeric data read from a CSV file.
#[derive(Debug, Clone)]
pub struct Table {
    pub sample: Sample,
    pub columns: Vec<String>,
    pub has_header: bool,
    /// File line numbers of rows dropped for missing values.
    pub dropped_rows: Vec<u64>,
}

fn resolve(token: &str, header: Option<&[String]>, width: usize) -> CliResult<usize> {
    if let Some(h) = header {
        if let Some(i) = h.iter().position(|c| c == token) {
            return Ok(i);
        }
    }
    match token.parse::<usize>() {
        Ok(k) if (1..=width).contains(&k) => Ok(k - 1),
        Ok(k) => Err(CliError::Data(format!("column position {k} is outside 1..={width}"))),
        Err(_) => Err(CliError::Data(format!("no column named '{token}'"))),
    }
}

pub fn read_csv(path: &Path, opts: &ReadOptions) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut records = reader.records().peekable();
    let first = match records.peek() {
        None => return Err(CliError::Data(format!("{}: empty file", path.display()))),
        Some(Err(e)) => return Err(CliError::Data(format!("{}: {e}", path.display()))),
        Some(Ok(r)) => r.clone(),
    };
    let width = first.len();
    let has_header = first.iter().any(|c| !is_missing(c) && c.parse::<f64>().is_err());
    let header: Option<Vec<String>> = has_header.then(|| first.iter().map(str::to_string).collect());
    if has_header {
        records.next();
    }
    let selected: Vec<usize> = if opts.columns.is_empty() {
        (0..width).collect()
    } else {
        opts.columns
            .iter()
            .map(|c| resolve(c, header.as_deref(), width))
            .collect::<CliResult<_>>()?
    };
    let filter = match &opts.filter {
        Some((col, value)) => Some((resolve(col, header.as_deref(), width)?, value.clone())),
        None => None,
    };
    let names: Vec<String> = selected
        .iter()
        .map(|&i| header.as_ref().map_or_else(|| format!("x{}", i + 1), |h| h[i].clone()))
        .collect();
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(CliError::Data(format!(
                "row {line}: expected {width} fields, found {}",
                rec.len()
            )));
        }
        if let Some((col, value)) = &filter {
            if rec.get(*col) != Some(value.as_str()) {
                continue;
            }
        }
        let mut row = Vec::with_capacity(selected.len());
        let mut missing = false;
        for (&c, name) in selected.iter().zip(&names) {
            let cell = rec.get(c).unwrap_or("");
            if is_missing(cell) {
                if !opts.drop_missing {
                    return Err(CliError::Data(format!(
                        "row {line}, column {} ('{name}'): missing value (pass --drop-missing to skip such rows)",
                        c + 1
                    )));
                }
                missing = true;
                break;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(CliError::Data(format!(
                        "row {line}, column {} ('{name}'): cannot parse '{cell}' as a finite number",
                        c + 1
                    )))
                }
            }
        }
        if missing {
            dropped.push(line);
        } else {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no complete data rows", path.display())));
    }
    let sample = Sample::from_rows(rows).map_err(CliError::from_input)?;
    Ok(Table {
        sample,
        columns: names,
        has_header,
        dropped_rows: dropped,
    })
}

/// `v` with 17 significant digits: fixed notation for decimal exponents in
/// [−5, 17), scientific otherwise, trailing zeros removed. Parsing the
/// result gives back `v` exactly.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.16e}");
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..17).contains(&exp) {
        trim(&format!("{v:.*}", (16 - exp) as usize))
    } else {
        format!("{}e{exp}", trim(mant))
    }
}

/// Headerless CSV, one observation per line.
pub fn write_csv<W: Write>(sample: &Sample, mut out: W) -> std::io::Result<()> {
    for row in sample.rows() {
        let line: Vec<String> = row.iter().map(|&v| format_g17(v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()
}
