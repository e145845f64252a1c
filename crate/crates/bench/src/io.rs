//! File plumbing: atomic writes, CSV tables, JSON, hashes and the columnar
//! binary dump.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{validation, BenchError, Result};

/// Unreadable inputs are validation errors; only failed writes are I/O errors.
pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| validation(format!("{}: {e}", path.display())))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| BenchError::io(path, e))
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    create_dir(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| BenchError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| BenchError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| BenchError::io(path, e))?;
    // Temporary files are created owner-only; results are ordinary files.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(tmp.path(), fs::Permissions::from_mode(0o644)).map_err(|e| BenchError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| BenchError::io(path, e.error))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("value serializes to JSON");
    v.push(b'\n');
    v
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| validation(format!("{}: {e}", path.display())))
}

/// Full-precision scientific notation (shortest round-trip digits).
pub fn sci(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:e}")
    }
}

/// Column-named table with string cells, rendered as CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory CSV");
        for r in &self.rows {
            w.write_record(r).expect("in-memory CSV");
        }
        w.into_inner().expect("in-memory CSV")
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| validation(format!("{}: {e}", path.display())))?;
        let columns = r
            .headers()
            .map_err(|e| validation(format!("{}: {e}", path.display())))?
            .iter()
            .map(String::from)
            .collect();
        let mut t = Self::new(columns);
        for rec in r.records() {
            let rec = rec.map_err(|e| validation(format!("{}: {e}", path.display())))?;
            t.rows.push(rec.iter().map(String::from).collect());
        }
        Ok(t)
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| validation(format!("missing column `{name}`")))
    }

    pub fn f64_at(&self, row: usize, col: usize) -> Result<f64> {
        let cell = &self.rows[row][col];
        match cell.as_str() {
            "NaN" => Ok(f64::NAN),
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            s => s.parse().map_err(|_| validation(format!("`{s}` in column `{}` is not a number", self.columns[col]))),
        }
    }
}

const DUMP_MAGIC: &[u8; 8] = b"HZCOLv1\0";

/// Header of the columnar dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub columns: Vec<String>,
    pub rows: usize,
    /// Always `"f64-le"`.
    pub dtype: String,
}

/// Columnar binary layout: 8-byte magic, little-endian `u64` header length,
/// JSON header, then each column as contiguous little-endian `f64`.
pub fn encode_columns(columns: &[(&str, &[f64])]) -> Result<Vec<u8>> {
    let rows = columns.first().map_or(0, |c| c.1.len());
    if columns.iter().any(|c| c.1.len() != rows) {
        return Err(validation("dump columns differ in length"));
    }
    let header = DumpHeader {
        columns: columns.iter().map(|c| c.0.to_string()).collect(),
        rows,
        dtype: "f64-le".into(),
    };
    let h = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + h.len() + 8 * rows * columns.len());
    out.extend_from_slice(DUMP_MAGIC);
    out.extend_from_slice(&(h.len() as u64).to_le_bytes());
    out.extend_from_slice(&h);
    for (_, data) in columns {
        for x in *data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_columns(bytes: &[u8]) -> Result<(DumpHeader, Vec<Vec<f64>>)> {
    let bad = || validation("not a columnar dump");
    if bytes.len() < 16 || &bytes[..8] != DUMP_MAGIC {
        return Err(bad());
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(16 + hlen..).ok_or_else(bad)?;
    let header: DumpHeader = serde_json::from_slice(&bytes[16..16 + hlen]).map_err(|_| bad())?;
    if body.len() != 8 * header.rows * header.columns.len() {
        return Err(validation("columnar dump is truncated"));
    }
    let cols = body
        .chunks_exact(8 * header.rows.max(1))
        .take(header.columns.len())
        .map(|c| c.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect())
        .collect::<Vec<Vec<f64>>>();
    let cols = if header.rows == 0 { vec![Vec::new(); header.columns.len()] } else { cols };
    Ok((header, cols))
}
