//! CSV ingestion and JSON/CSV output for the command-line front end.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{CircError, Result};

/// Unit of angles in input files. Conversion happens at ingestion only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum AngleUnit {
    #[default]
    #[value(name = "rad")]
    Radians,
    #[value(name = "deg")]
    Degrees,
}

impl AngleUnit {
    pub fn to_radians(self, value: f64) -> f64 {
        match self {
            AngleUnit::Radians => value,
            AngleUnit::Degrees => value.to_radians(),
        }
    }
}

/// Parsed input: `theta,y` plus optional real covariates `x*` and angular
/// covariates `phi*`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub theta: Vec<f64>,
    pub y: Vec<f64>,
    pub linear_names: Vec<String>,
    /// One row per observation.
    pub linear: Vec<Vec<f64>>,
    pub circular_names: Vec<String>,
    pub circular: Vec<Vec<f64>>,
}

impl Table {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

#[derive(Clone, Copy)]
enum Column {
    Theta,
    Y,
    Linear(usize),
    Circular(usize),
}

fn field_error(row: usize, field: &str, reason: impl std::fmt::Display) -> CircError {
    CircError::InvalidResponse {
        row,
        reason: format!("field `{field}`: {reason}"),
    }
}

/// Reads a comma-separated table with a header row. Angle columns (`theta`
/// and `phi*`) are converted to radians according to `unit`. Errors name
/// the zero-based data row and the field.
pub fn read_table<R: Read>(reader: R, unit: AngleUnit) -> Result<Table> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| CircError::InvalidArgument(format!("cannot read header: {e}")))?
        .clone();
    let mut table = Table::default();
    let mut columns = Vec::with_capacity(headers.len());
    for name in headers.iter() {
        let lower = name.to_ascii_lowercase();
        let column = match lower.as_str() {
            "theta" => Column::Theta,
            "y" => Column::Y,
            _ if lower.starts_with("phi") => {
                table.circular_names.push(name.to_string());
                Column::Circular(table.circular_names.len() - 1)
            }
            _ if lower.starts_with('x') => {
                table.linear_names.push(name.to_string());
                Column::Linear(table.linear_names.len() - 1)
            }
            _ => {
                return Err(CircError::InvalidArgument(format!(
                    "unknown column `{name}`; expected theta, y, x1.. or phi1.."
                )))
            }
        };
        columns.push(column);
    }
    for required in ["theta", "y"] {
        if !headers.iter().any(|h| h.eq_ignore_ascii_case(required)) {
            return Err(CircError::InvalidArgument(format!("missing column `{required}`")));
        }
    }
    for (row, record) in csv.records().enumerate() {
        let record = record.map_err(|e| field_error(row, "*", e))?;
        if record.len() != columns.len() {
            return Err(field_error(
                row,
                "*",
                format!("expected {} fields, found {}", columns.len(), record.len()),
            ));
        }
        let mut linear = vec![f64::NAN; table.linear_names.len()];
        let mut circular = vec![f64::NAN; table.circular_names.len()];
        for ((raw, column), name) in record.iter().zip(&columns).zip(headers.iter()) {
            let value: f64 = raw
                .parse()
                .map_err(|_| field_error(row, name, format!("cannot parse `{raw}` as a number")))?;
            if !value.is_finite() {
                return Err(field_error(row, name, "value is not finite"));
            }
            match *column {
                Column::Theta => table.theta.push(unit.to_radians(value)),
                Column::Y => table.y.push(value),
                Column::Linear(k) => linear[k] = value,
                Column::Circular(k) => circular[k] = unit.to_radians(value),
            }
        }
        if !linear.is_empty() {
            table.linear.push(linear);
        }
        if !circular.is_empty() {
            table.circular.push(circular);
        }
    }
    if table.is_empty() {
        return Err(CircError::InvalidArgument("input has no data rows".into()));
    }
    Ok(table)
}

pub fn read_table_path(path: &Path, unit: AngleUnit) -> Result<Table> {
    let file = fs::File::open(path)
        .map_err(|e| CircError::Io(format!("cannot open {}: {e}", path.display())))?;
    read_table(io::BufReader::new(file), unit)
}

/// JSON formatter that prints every float with 17 significant digits, which
/// round-trips any `f64` exactly.
struct Precise;

impl serde_json::ser::Formatter for Precise {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Serialises `value` as compact JSON with full float precision. Non-finite
/// floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise);
    value
        .serialize(&mut ser)
        .map_err(|e| CircError::Io(format!("cannot serialise output: {e}")))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| CircError::Io(e.to_string()))
}

/// Writes `contents` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io_err = |e: io::Error| CircError::Io(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| CircError::Io(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(contents)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err)
}
