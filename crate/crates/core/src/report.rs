//! Table and curve writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ResultTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    /// Format implied by a file extension; JSON unless the path ends in `.csv`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => TableFormat::Csv,
            _ => TableFormat::Json,
        }
    }
}

pub const CSV_HEADER: &str = "row,column,value,stderr,n_runs,censored_fraction";

/// Decimal with 17 significant digits, without exponent or grouping.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (16 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// CSV rendering. Cells without an estimate have empty numeric fields.
pub fn table_to_csv(t: &ResultTable) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let header: Vec<&str> = CSV_HEADER.split(',').collect();
    w.write_record(&header).expect("writing to memory");
    for cell in &t.cells {
        let mut record = vec![format_number(cell.row), cell.column.clone()];
        match &cell.estimate {
            Some(e) => record.extend([
                format_number(e.value),
                format_number(e.stderr),
                e.n_runs.to_string(),
                format_number(e.censored_fraction),
            ]),
            None => record.extend(std::iter::repeat_n(String::new(), 4)),
        }
        w.write_record(&record).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 fields")
}

pub fn table_to_json(t: &ResultTable) -> Result<String> {
    let mut s =
        serde_json::to_string_pretty(t).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn table_from_json(text: &str) -> Result<ResultTable> {
    serde_json::from_str(text).map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let io = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, contents).map_err(io)
}

pub fn emit_table(t: &ResultTable, format: TableFormat, path: &Path) -> Result<()> {
    let text = match format {
        TableFormat::Csv => table_to_csv(t),
        TableFormat::Json => table_to_json(t)?,
    };
    write_file(path, &text)
}

/// A plot series of `(x, y, stderr)` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64, f64)>,
}

impl Curve {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "curve {} has no points",
                self.label
            )));
        }
        if self.points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidArgument(format!(
                "curve {} needs strictly increasing x",
                self.label
            )));
        }
        Ok(())
    }
}

/// Whitespace-separated `x y stderr` lines under a `#` header.
pub fn curve_to_text(c: &Curve) -> Result<String> {
    c.validate()?;
    let mut out = format!("# {}\n# x y stderr\n", c.label);
    for &(x, y, se) in &c.points {
        let _ = writeln!(
            out,
            "{} {} {}",
            format_number(x),
            format_number(y),
            format_number(se)
        );
    }
    Ok(out)
}

pub fn emit_curve(c: &Curve, path: &Path) -> Result<()> {
    let text = curve_to_text(c)?;
    write_file(path, &text)
}

/// One series per column, with the row keys as abscissae. Cells without an
/// estimate are left out.
pub fn table_curves(t: &ResultTable) -> Vec<Curve> {
    t.columns
        .iter()
        .map(|column| {
            let mut points: Vec<(f64, f64, f64)> = t
                .cells
                .iter()
                .filter(|c| &c.column == column)
                .filter_map(|c| c.estimate.map(|e| (c.row, e.value, e.stderr)))
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Curve {
                label: column.clone(),
                points,
            }
        })
        .filter(|c| !c.points.is_empty())
        .collect()
}

/// Writes each series of `curves` to `dir/<prefix>_<label>.dat`.
pub fn emit_curves(curves: &[Curve], dir: &Path, prefix: &str) -> Result<Vec<std::path::PathBuf>> {
    let mut paths = Vec::new();
    for c in curves {
        let name: String = c
            .label
            .chars()
            .map(|ch| {
                if ch.is_ascii_alphanumeric() || ch == '.' || ch == '-' {
                    ch
                } else {
                    '_'
                }
            })
            .collect();
        let path = dir.join(format!("{prefix}_{name}.dat"));
        emit_curve(c, &path)?;
        paths.push(path);
    }
    Ok(paths)
}
