//! Binary matrix format: little-endian `u64` rows, `u64` cols, then
//! `rows · cols` little-endian `f64` values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::DenseMatrix;
use crate::{Error, Result};

pub fn write_matrix<W: Write>(mut w: W, m: &DenseMatrix) -> Result<()> {
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.to_row_major() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<DenseMatrix> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::InvalidDimensions(format!("{rows}x{cols} overflows")))?;
    let mut data = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        r.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    DenseMatrix::from_row_major(rows, cols, data)
}

pub fn save_matrix(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    read_matrix(BufReader::new(File::open(path)?))
}
