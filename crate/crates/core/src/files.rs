//! Document I/O: JSON (de)serialization plus atomic writes so failures never
//! leave partial output files behind.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed document {path}: {source}")]
    Malformed { path: String, source: serde_json::Error },
}

fn io_err(path: &Path, source: std::io::Error) -> FileError {
    FileError::Io { path: path.display().to_string(), source }
}

/// Serializes pretty JSON to a temporary sibling file and renames it into
/// place.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FileError> {
    let body = serde_json::to_string_pretty(value).expect("serializable document");
    write_text(path, &body)
}

pub fn write_text(path: &Path, body: &str) -> Result<(), FileError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    let mut file = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    file.write_all(body.as_bytes()).map_err(|e| io_err(&tmp, e))?;
    if !body.ends_with('\n') {
        file.write_all(b"\n").map_err(|e| io_err(&tmp, e))?;
    }
    file.sync_all().map_err(|e| io_err(&tmp, e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FileError> {
    let body = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&body)
        .map_err(|e| FileError::Malformed { path: path.display().to_string(), source: e })
}

pub fn read_text(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}
