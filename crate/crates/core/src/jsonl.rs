//! Line-oriented JSON helpers shared by every on-disk table.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// A parsed line or the reason it was rejected. Line numbers are 1-based.
pub type LineResult<T> = (usize, std::result::Result<T, String>);

/// Parse every non-blank line of `reader`. Malformed lines are returned as
/// errors in place instead of aborting the read.
pub fn parse_lines<T, R>(reader: R, path: &Path) -> Result<Vec<LineResult<T>>>
where
    T: DeserializeOwned,
    R: BufRead,
{
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((
            idx + 1,
            serde_json::from_str::<T>(&line).map_err(|e| e.to_string()),
        ));
    }
    Ok(out)
}

/// Read a whole JSONL table, failing on the first malformed line.
pub fn read_all<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_lines(BufReader::new(file), path)?
        .into_iter()
        .map(|(line, r)| r.map_err(|m| Error::parse(line, format!("{}: {m}", path.display()))))
        .collect()
}

/// Like [`read_all`] but a missing file reads as empty.
pub fn read_all_or_empty<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if path.exists() {
        read_all(path)
    } else {
        Ok(Vec::new())
    }
}

pub fn to_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("serializable record");
    s.push('\n');
    s
}

/// Append records and fsync before returning.
pub fn append<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    if records.is_empty() {
        return Ok(());
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        w.write_all(to_line(r).as_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    let file = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    file.sync_all().map_err(|e| Error::io(path, e))
}

/// Replace `path` with the given records via a temp file and rename.
pub fn write_atomic<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut buf = String::new();
    for r in records {
        buf.push_str(&to_line(r));
    }
    write_bytes_atomic(path, buf.as_bytes())
}

pub fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
