//! Raw binary array container and CSV vector export.
//!
//! Container layout (all little-endian):
//!
//! ```text
//! offset  size  field
//!      0     4  magic "INVR"
//!      4     4  u32 rank (1 or 2)
//!      8     4  u32 dim0 (length, or rows)
//!     12     4  u32 dim1 (1 for rank 1, columns for rank 2)
//!     16   8*N  f64 payload, row-major
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"INVR";
pub const HEADER_LEN: usize = 16;

/// A decoded container.
#[derive(Debug, Clone, PartialEq)]
pub struct RawArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl RawArray {
    pub fn into_vector(self) -> Result<DVector<f64>> {
        match self.shape.as_slice() {
            [_] => Ok(DVector::from_vec(self.data)),
            [_, 1] | [1, _] => Ok(DVector::from_vec(self.data)),
            other => Err(Error::Parameter(format!("expected a vector, found shape {other:?}"))),
        }
    }

    pub fn into_matrix(self) -> Result<DMatrix<f64>> {
        match self.shape.as_slice() {
            [r, c] => Ok(DMatrix::from_row_slice(*r, *c, &self.data)),
            [n] => Ok(DMatrix::from_row_slice(*n, 1, &self.data)),
            other => Err(Error::Parameter(format!("expected a matrix, found shape {other:?}"))),
        }
    }
}

pub fn encode(shape: &[usize], data: &[f64]) -> Result<Vec<u8>> {
    let (rank, d0, d1) = match *shape {
        [n] => (1u32, n, 1),
        [r, c] => (2u32, r, c),
        _ => return Err(Error::Parameter(format!("rank {} not supported", shape.len()))),
    };
    if d0 * d1 != data.len() {
        return Err(Error::Dimension {
            what: "array payload",
            expected: d0 * d1,
            got: data.len(),
        });
    }
    let to_u32 = |x: usize| {
        u32::try_from(x).map_err(|_| Error::Parameter(format!("dimension {x} exceeds u32")))
    };
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * data.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&rank.to_le_bytes());
    buf.extend_from_slice(&to_u32(d0)?.to_le_bytes());
    buf.extend_from_slice(&to_u32(d1)?.to_le_bytes());
    for x in data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    Ok(buf)
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<RawArray> {
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let rank = word(4);
    let (d0, d1) = (word(8), word(12));
    let shape = match rank {
        1 => vec![d0],
        2 => vec![d0, d1],
        r => return Err(bad(format!("unsupported rank {r}"))),
    };
    let count = d0 * if rank == 2 { d1 } else { 1 };
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != 8 * count {
        return Err(bad(format!("payload has {} bytes, header implies {}", payload.len(), 8 * count)));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RawArray { shape, data })
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    write_bytes(path, &encode(&[v.len()], v.as_slice())?)
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let row_major: Vec<f64> = m.transpose().as_slice().to_vec();
    write_bytes(path, &encode(&[m.nrows(), m.ncols()], &row_major)?)
}

/// Stacks equal-length vectors as the rows of a rank-2 container.
pub fn write_rows(path: &Path, rows: &[&DVector<f64>]) -> Result<()> {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut data = Vec::with_capacity(rows.len() * cols);
    for r in rows {
        if r.len() != cols {
            return Err(Error::Dimension {
                what: "stacked row",
                expected: cols,
                got: r.len(),
            });
        }
        data.extend_from_slice(r.as_slice());
    }
    write_bytes(path, &encode(&[rows.len(), cols], &data)?)
}

pub fn read_array(path: &Path) -> Result<RawArray> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    read_array(path)?.into_vector()
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    read_array(path)?.into_matrix()
}

/// Rows of a rank-2 container as vectors.
pub fn read_rows(path: &Path) -> Result<Vec<DVector<f64>>> {
    let raw = read_array(path)?;
    let (r, c) = match raw.shape.as_slice() {
        [r, c] => (*r, *c),
        [n] => (1, *n),
        _ => unreachable!(),
    };
    Ok((0..r)
        .map(|i| DVector::from_column_slice(&raw.data[i * c..(i + 1) * c]))
        .collect())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// One vector per line, comma-separated, shortest round-trip decimal form.
pub fn vectors_to_csv(rows: &[&DVector<f64>]) -> String {
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv_vectors(path: &Path, rows: &[&DVector<f64>]) -> Result<()> {
    let mut buf = Vec::new();
    buf.write_all(vectors_to_csv(rows).as_bytes())
        .map_err(|e| Error::io(path, e))?;
    write_bytes(path, &buf)
}
