//! Dense CSV matrices and JSON documents, written atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{NjglError, Result};
use crate::linalg::Mat;

fn temp_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_path(path);
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res.map_err(NjglError::from)
}

/// Row-major, comma-delimited, no header, shortest round-trip decimal form.
pub fn matrix_to_csv(a: &Mat) -> String {
    let mut out = String::with_capacity(a.nrows() * a.ncols() * 20);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", a[(i, j)]));
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix_csv(text: &str, origin: &str) -> Result<Mat> {
    let err = |message: String| NjglError::Parse {
        path: origin.to_string(),
        message,
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| err(format!("line {}: {e}", lineno + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(err(format!(
                    "line {}: expected {} fields, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(err("no data rows".into()));
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn read_matrix_csv(path: &Path) -> Result<Mat> {
    let text = fs::read_to_string(path)?;
    parse_matrix_csv(&text, &path.display().to_string())
}

pub fn write_matrix_csv(path: &Path, a: &Mat) -> Result<()> {
    write_atomic(path, matrix_to_csv(a).as_bytes())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| NjglError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
