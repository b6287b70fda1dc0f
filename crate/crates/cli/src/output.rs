use std::fs;
use std::path::{Path, PathBuf};

use riesz_tf::{MinimizerResult, Potential};
use serde::Serialize;

use crate::CliError;

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| csv_err(path, e))
}

/// `r, rho, u, V`.
pub fn write_density(dir: &Path, result: &MinimizerResult, potential: &Potential) -> Result<PathBuf, CliError> {
    let path = dir.join("density.csv");
    let rows: Vec<Vec<String>> = result
        .rho
        .grid()
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            vec![num(r), num(result.rho.values()[i]), num(result.u.values()[i]), num(potential.values().values()[i])]
        })
        .collect();
    write_rows(&path, &["r", "rho", "u", "V"], &rows)?;
    Ok(path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| csv_err(path, e))?;
    fs::write(path, text + "\n").map_err(|e| csv_err(path, e))
}

