//! `CMX1` binary matrix files.
//!
//! Layout: the magic bytes `CMX1`, the row and column counts as little-endian
//! `u64`, then `rows * cols` complex entries in column-major order, each written
//! as two little-endian `f64` values (real part first).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{c64, CMatrix};
use crate::error::{Error, Result};

pub const CMX_MAGIC: &[u8; 4] = b"CMX1";

pub fn write_cmx<W: Write>(mut w: W, m: &CMatrix) -> Result<()> {
    w.write_all(CMX_MAGIC)?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for z in m.data() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_cmx<R: Read>(mut r: R) -> Result<CMatrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CMX_MAGIC {
        return Err(Error::Format(format!("bad CMX magic {magic:?}")));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("CMX dimensions overflow".into()))?;
    let mut bytes = vec![0u8; len * 16];
    r.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            c64::new(re, im)
        })
        .collect();
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after CMX payload".into()));
    }
    Ok(CMatrix::from_col_major(rows, cols, data).expect("length checked above"))
}

pub fn write_cmx_file(path: impl AsRef<Path>, m: &CMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_cmx(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn read_cmx_file(path: impl AsRef<Path>) -> Result<CMatrix> {
    read_cmx(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_exact() {
        let m = CMatrix::from_fn(2, 1, |i, _| c64::new(i as f64 + 0.5, -1.0));
        let mut buf = Vec::new();
        write_cmx(&mut buf, &m).unwrap();
        assert_eq!(&buf[..4], b"CMX1");
        assert_eq!(u64::from_le_bytes(buf[4..12].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[12..20].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(buf[20..28].try_into().unwrap()), 0.5);
        assert_eq!(f64::from_le_bytes(buf[28..36].try_into().unwrap()), -1.0);
        assert_eq!(buf.len(), 20 + 2 * 16);
        assert_eq!(read_cmx(&buf[..]).unwrap(), m);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(read_cmx(&b"CMX2\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        write_cmx(&mut buf, &CMatrix::identity(2)).unwrap();
        assert!(read_cmx(&buf[..buf.len() - 1]).is_err());
        buf.push(0);
        assert!(read_cmx(&buf[..]).is_err());
    }
}
