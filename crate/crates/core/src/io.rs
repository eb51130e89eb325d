//! Binary matrix files.
//!
//! Layout (little-endian): `"MMMB"`, version `u32 = 1`, dtype `u32`
//! (0 = f32, 1 = f64), rows `u64`, cols `u64`, then `rows * cols` elements in
//! row-major order without padding.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::element::{ElemKind, Element};
use crate::error::{Error, Result};
use crate::matrix::{AnyMatrix, DenseMatrix, LaneConfig};

pub const MAGIC: [u8; 4] = *b"MMMB";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8;

pub fn write_matrix<T: Element>(m: &DenseMatrix<T>, w: &mut impl Write) -> Result<()> {
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(&MAGIC);
    header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    header.extend_from_slice(&T::KIND.code().to_le_bytes());
    header.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    header.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    w.write_all(&header)?;

    let mut buf = Vec::with_capacity(m.cols() * T::KIND.size());
    for row in m.iter_rows() {
        buf.clear();
        for &v in row {
            v.write_le(&mut buf);
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn write_file<T: Element>(m: &DenseMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix(m, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_any(m: &AnyMatrix, path: impl AsRef<Path>) -> Result<()> {
    match m {
        AnyMatrix::F32(m) => write_file(m, path),
        AnyMatrix::F64(m) => write_file(m, path),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub kind: ElemKind,
    pub rows: usize,
    pub cols: usize,
}

fn read_exact_or_truncated(r: &mut impl Read, buf: &mut [u8], offset: u64) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(Error::Truncated {
                    expected: offset + buf.len() as u64,
                    found: offset + filled as u64,
                })
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

fn read_header(r: &mut impl Read) -> Result<Header> {
    let mut raw = [0u8; HEADER_LEN];
    read_exact_or_truncated(r, &mut raw, 0)?;
    let magic: [u8; 4] = raw[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = u32::from_le_bytes(raw[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let code = u32::from_le_bytes(raw[8..12].try_into().unwrap());
    let kind = ElemKind::from_code(code).ok_or(Error::UnknownDtype(code))?;
    let rows = u64::from_le_bytes(raw[12..20].try_into().unwrap());
    let cols = u64::from_le_bytes(raw[20..28].try_into().unwrap());
    let (rows, cols) = match (usize::try_from(rows), usize::try_from(cols)) {
        (Ok(r), Ok(c)) => (r, c),
        _ => {
            return Err(Error::DimensionOverflow {
                rows: rows as usize,
                cols: cols as usize,
            })
        }
    };
    Ok(Header { kind, rows, cols })
}

fn read_body<T: Element>(
    r: &mut impl Read,
    h: &Header,
    lanes: LaneConfig,
) -> Result<DenseMatrix<T>> {
    let mut m = DenseMatrix::<T>::zeros(h.rows, h.cols, lanes)?;
    let row_bytes = h.cols * T::KIND.size();
    let mut buf = vec![0u8; row_bytes];
    for i in 0..h.rows {
        let offset = (HEADER_LEN + i * row_bytes) as u64;
        read_exact_or_truncated(r, &mut buf, offset)?;
        let row = m.row_mut(i);
        for (v, chunk) in row.iter_mut().zip(buf.chunks_exact(T::KIND.size())) {
            *v = T::read_le(chunk);
        }
    }
    Ok(m)
}

/// Reads a matrix of either kind, padded with the default lane configuration
/// for its element type.
pub fn read_matrix(r: &mut impl Read) -> Result<AnyMatrix> {
    let h = read_header(r)?;
    let lanes = LaneConfig::default_for(h.kind);
    Ok(match h.kind {
        ElemKind::F32 => AnyMatrix::F32(read_body(r, &h, lanes)?),
        ElemKind::F64 => AnyMatrix::F64(read_body(r, &h, lanes)?),
    })
}

/// Element kind and dimensions of a matrix file, without reading its body.
pub fn read_file_header(path: impl AsRef<Path>) -> Result<Header> {
    read_header(&mut File::open(path)?)
}

pub fn read_file(path: impl AsRef<Path>) -> Result<AnyMatrix> {
    read_matrix(&mut BufReader::new(File::open(path)?))
}

/// Reads a matrix that must hold elements of type `T`.
pub fn read_file_as<T: Element>(
    path: impl AsRef<Path>,
    lanes: LaneConfig,
) -> Result<DenseMatrix<T>> {
    let mut r = BufReader::new(File::open(path)?);
    let h = read_header(&mut r)?;
    if h.kind != T::KIND {
        return Err(Error::KindMismatch {
            expected: T::KIND,
            found: h.kind,
        });
    }
    read_body(&mut r, &h, lanes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode<T: Element>(m: &DenseMatrix<T>) -> Vec<u8> {
        let mut out = Vec::new();
        write_matrix(m, &mut out).unwrap();
        out
    }

    #[test]
    fn identity_round_trip_is_bit_exact() {
        let m = DenseMatrix::<f32>::identity(4, LaneConfig::default_for(ElemKind::F32)).unwrap();
        let bytes = encode(&m);
        assert_eq!(bytes.len(), HEADER_LEN + 16 * 4);
        let AnyMatrix::F32(back) = read_matrix(&mut bytes.as_slice()).unwrap() else {
            panic!("wrong kind");
        };
        assert!(back.logical_eq(&m));
    }

    #[test]
    fn header_layout() {
        let m = DenseMatrix::<f64>::zeros_default(2, 3).unwrap();
        let bytes = encode(&m);
        assert_eq!(&bytes[0..4], b"MMMB");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..20], &2u64.to_le_bytes());
        assert_eq!(&bytes[20..28], &3u64.to_le_bytes());
        assert_eq!(bytes.len(), HEADER_LEN + 6 * 8);
    }

    #[test]
    fn distinct_format_errors() {
        let m = DenseMatrix::<f32>::identity(4, LaneConfig::default_for(ElemKind::F32)).unwrap();
        let good = encode(&m);

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            read_matrix(&mut bad_magic.as_slice()),
            Err(Error::BadMagic(_))
        ));

        let mut bad_dtype = good.clone();
        bad_dtype[8] = 7;
        assert!(matches!(
            read_matrix(&mut bad_dtype.as_slice()),
            Err(Error::UnknownDtype(7))
        ));

        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(matches!(
            read_matrix(&mut bad_version.as_slice()),
            Err(Error::UnsupportedVersion(2))
        ));

        let truncated = &good[..good.len() - 3];
        assert!(matches!(
            read_matrix(&mut &truncated[..]),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(
            read_matrix(&mut &good[..10]),
            Err(Error::Truncated { .. })
        ));
    }
}
