//! CSV and JSON emission, and CSV input for the command-line tools.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits, which round-trips every `f64`.
pub fn fmt_g17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Formats an optional float, leaving the field empty when absent.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_g17).unwrap_or_default()
}

/// Writes a CSV file with a header row, creating parent directories.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes pretty-printed JSON, creating parent directories.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Reads the first `k` columns of a numeric CSV; a non-numeric first row is taken as a header.
pub fn read_columns(path: &Path, k: usize) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_path(path)?;
    let mut cols = vec![Vec::new(); k];
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() < k {
            return Err(Error::InvalidArgument(format!(
                "{}: row {} has {} columns, need {k}",
                path.display(),
                i + 1,
                rec.len()
            )));
        }
        let parsed: std::result::Result<Vec<f64>, _> = (0..k).map(|j| rec[j].parse::<f64>()).collect();
        match parsed {
            Ok(v) => cols.iter_mut().zip(v).for_each(|(c, x)| c.push(x)),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::InvalidArgument(format!("{}: row {}: {e}", path.display(), i + 1))),
        }
    }
    Ok(cols)
}
