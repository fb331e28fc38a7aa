//! `WPK1` binary field format.
//!
//! Layout: the four magic bytes `WPK1`, then little-endian `u64 n`,
//! `f64 x_min`, `f64 dx`, then `n` interleaved `(re, im)` `f64` pairs.
//! No padding, no checksum.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{ComplexField, Grid1D};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"WPK1";
const HEADER_LEN: usize = 4 + 8 + 8 + 8;

pub fn write_field<W: Write>(f: &ComplexField, mut w: W) -> Result<()> {
    let g = f.grid();
    w.write_all(MAGIC)?;
    w.write_all(&(g.n() as u64).to_le_bytes())?;
    w.write_all(&g.x_min().to_le_bytes())?;
    w.write_all(&g.dx().to_le_bytes())?;
    for v in f.values() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<ComplexField> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::Header(format!(
            "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Header(format!("bad magic {:?}", &bytes[..4])));
    }
    let word = |at: usize| -> [u8; 8] { bytes[at..at + 8].try_into().expect("8-byte slice") };
    let n = u64::from_le_bytes(word(4));
    let x_min = f64::from_le_bytes(word(12));
    let dx = f64::from_le_bytes(word(20));
    let n = usize::try_from(n).map_err(|_| Error::Header(format!("n = {n} does not fit in memory")))?;
    let grid = Grid1D::new(n, x_min, dx).map_err(|e| Error::Header(e.to_string()))?;
    let payload = &bytes[HEADER_LEN..];
    let expected = n
        .checked_mul(16)
        .ok_or_else(|| Error::Header(format!("n = {n} overflows the payload size")))?;
    if payload.len() != expected {
        return Err(Error::Truncated { expected, found: payload.len() });
    }
    let values = payload
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    ComplexField::new(grid, values)
}

pub fn save_field(f: &ComplexField, path: impl AsRef<Path>) -> Result<()> {
    write_field(f, BufWriter::new(File::create(path)?))
}

pub fn load_field(path: impl AsRef<Path>) -> Result<ComplexField> {
    read_field(BufReader::new(File::open(path)?))
}
