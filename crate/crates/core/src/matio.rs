//! Raw matrix files.
//!
//! Layout: 8-byte magic `OAMPMAT1`, u64 LE row count, u64 LE column count,
//! then `rows·cols` IEEE-754 f64 values, little-endian, row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MATRIX_MAGIC: &[u8; 8] = b"OAMPMAT1";

#[derive(Debug, Clone, PartialEq)]
pub struct RawMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub data: Vec<f64>,
}

impl RawMatrix {
    pub fn from_dense(a: &nalgebra::DMatrix<f64>) -> Self {
        let (rows, cols) = a.shape();
        let data = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|(r, c)| a[(r, c)])
            .collect();
        RawMatrix { rows, cols, data }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

pub fn write_matrix<W: Write>(w: &mut W, m: &RawMatrix) -> Result<()> {
    if m.data.len() != m.rows * m.cols {
        return Err(Error::InvalidDimension(format!(
            "{}x{} matrix with {} values",
            m.rows,
            m.cols,
            m.data.len()
        )));
    }
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&(m.rows as u64).to_le_bytes())?;
    w.write_all(&(m.cols as u64).to_le_bytes())?;
    for v in &m.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix<R: Read>(r: &mut R) -> Result<RawMatrix> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated matrix header".into()))?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Format(format!("bad matrix magic {magic:?}")));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut word)
            .map_err(|_| Error::Format("truncated matrix header".into()))?;
        Ok(u64::from_le_bytes(word))
    };
    let rows = next_u64(r)? as usize;
    let cols = next_u64(r)? as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("matrix dimensions overflow".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Format(format!(
            "{rows}x{cols} matrix needs {} payload bytes, found {}",
            count * 8,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RawMatrix { rows, cols, data })
}

pub fn save_matrix(path: &Path, m: &RawMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<RawMatrix> {
    read_matrix(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let m = RawMatrix {
            rows: 1,
            cols: 2,
            data: vec![1.0, -0.5],
        };
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        let mut want = b"OAMPMAT1".to_vec();
        want.extend_from_slice(&[1, 0, 0, 0, 0, 0, 0, 0]);
        want.extend_from_slice(&[2, 0, 0, 0, 0, 0, 0, 0]);
        want.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0xf0, 0x3f]);
        want.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0xe0, 0xbf]);
        assert_eq!(buf, want);
        assert_eq!(read_matrix(&mut buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_matrix(&mut &b"OAMPMAT2"[..]).is_err());
        let mut buf = Vec::new();
        write_matrix(
            &mut buf,
            &RawMatrix {
                rows: 2,
                cols: 2,
                data: vec![0.0; 4],
            },
        )
        .unwrap();
        buf.pop();
        assert!(matches!(read_matrix(&mut buf.as_slice()), Err(Error::Format(_))));
    }
}
