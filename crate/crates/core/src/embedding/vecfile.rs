//! `VEC1` sentence-vector files and `VECW1` word-vector files.
//!
//! ```text
//! VEC1 <dim> <count>
//! <sentence_id>\t<v1> <v2> ... <vdim>
//! ```
//!
//! Exactly `count` rows follow the header and the file ends with a newline.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::VectorStore;

pub const EXTERNAL_BACKEND: &str = "external";

/// Parse a header-prefixed vector file. Returns `(dim, rows)`.
pub(crate) type Rows = Vec<(String, Vec<f64>)>;

pub(crate) fn read_rows(reader: impl BufRead, magic: &str) -> Result<(usize, Rows)> {
    let mut lines = Vec::new();
    let mut reader = reader;
    let mut last_had_newline = true;
    loop {
        let mut buf = String::new();
        let n = reader
            .read_line(&mut buf)
            .map_err(|e| Error::parse(lines.len() + 1, e))?;
        if n == 0 {
            break;
        }
        last_had_newline = buf.ends_with('\n');
        let trimmed = buf.trim_end_matches(['\n', '\r']).to_string();
        lines.push(trimmed);
    }
    let header = lines.first().ok_or_else(|| Error::parse(1, "missing header"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != magic {
        return Err(Error::parse(1, format!("expected `{magic} <dim> <count>`")));
    }
    let dim: usize = parts[1].parse().map_err(|_| Error::parse(1, "bad dimension"))?;
    let count: usize = parts[2].parse().map_err(|_| Error::parse(1, "bad count"))?;
    if dim == 0 {
        return Err(Error::parse(1, "dimension must be positive"));
    }
    if !last_had_newline {
        return Err(Error::parse(lines.len(), "missing trailing newline"));
    }
    let body = &lines[1..];
    if body.len() != count {
        return Err(Error::parse(
            lines.len(),
            format!("header declares {count} rows, found {}", body.len()),
        ));
    }
    let mut rows = Vec::with_capacity(count);
    for (i, line) in body.iter().enumerate() {
        let lineno = i + 2;
        let (id, values) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(lineno, "expected <id>\\t<values>"))?;
        if id.is_empty() {
            return Err(Error::parse(lineno, "empty id"));
        }
        let values = values
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::parse(lineno, format!("malformed float `{v}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim {
            return Err(Error::parse(
                lineno,
                format!("dimension mismatch: expected {dim}, found {}", values.len()),
            ));
        }
        rows.push((id.to_string(), values));
    }
    Ok((dim, rows))
}

/// Read a `VEC1` file into a store. When `known_ids` is given, every row
/// must name a sentence in it.
pub fn read_vec1(
    reader: impl BufRead,
    backend_id: &str,
    known_ids: Option<&HashSet<String>>,
) -> Result<VectorStore> {
    let (dim, rows) = read_rows(reader, "VEC1")?;
    let mut store = VectorStore::new(backend_id, dim);
    for (i, (id, values)) in rows.into_iter().enumerate() {
        let lineno = i + 2;
        if known_ids.is_some_and(|k| !k.contains(&id)) {
            return Err(Error::parse(lineno, format!("unknown sentence id `{id}`")));
        }
        store
            .insert(id, &values)
            .map_err(|e| Error::parse(lineno, e))?;
    }
    Ok(store)
}

/// Load externally encoded sentence vectors under backend `external`.
pub fn import_external_vectors(path: &Path, known_ids: Option<&HashSet<String>>) -> Result<VectorStore> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_vec1(BufReader::new(file), EXTERNAL_BACKEND, known_ids)
}

pub fn write_vec1(store: &VectorStore, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "VEC1 {} {}", store.dim(), store.len())?;
    for (id, v) in store.iter() {
        write_row(w, id, v.iter())?;
    }
    Ok(())
}

pub(crate) fn write_row<T: std::fmt::Display>(
    w: &mut impl Write,
    id: &str,
    values: impl Iterator<Item = T>,
) -> std::io::Result<()> {
    w.write_all(id.as_bytes())?;
    w.write_all(b"\t")?;
    for (i, v) in values.enumerate() {
        if i > 0 {
            w.write_all(b" ")?;
        }
        write!(w, "{v}")?;
    }
    w.write_all(b"\n")
}
