//! `RGC1` coded tensor files.
//!
//! ```text
//! "RGC1" | r: u32 | W: u32 | catalog hash: u64 | records: u32
//! per record: segment: u32 | first matrix bits | second matrix bits
//! ```
//!
//! Integers are little-endian. Each matrix is `r * W` bits in row-major order,
//! packed eight to a byte with the earliest bit in the least significant
//! position, and padded with zero bits to a whole byte.

use std::io::{Read, Write};

use super::CodedMatrix;
use crate::error::{Error, Result};

pub const RGC_MAGIC: &[u8; 4] = b"RGC1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodedRecord {
    pub segment: usize,
    pub first: CodedMatrix,
    pub second: CodedMatrix,
}

/// A set of coded (first, second) pairs sharing one catalog binding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodedDataset {
    pub rows: usize,
    pub width: usize,
    pub catalog_hash: u64,
    pub records: Vec<CodedRecord>,
}

impl CodedDataset {
    pub fn new(rows: usize, width: usize, catalog_hash: u64) -> Self {
        CodedDataset {
            rows,
            width,
            catalog_hash,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, segment: usize, first: CodedMatrix, second: CodedMatrix) -> Result<()> {
        for m in [&first, &second] {
            if m.rows != self.rows || m.width != self.width || m.catalog_hash != self.catalog_hash {
                return Err(Error::Validation(format!(
                    "matrix {}x{} (catalog {:016x}) does not match dataset {}x{} (catalog {:016x})",
                    m.rows, m.width, m.catalog_hash, self.rows, self.width, self.catalog_hash
                )));
            }
        }
        self.records.push(CodedRecord {
            segment,
            first,
            second,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn pack(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        out[i / 8] |= b << (i % 8);
    }
    out
}

fn unpack(bytes: &[u8], n: usize) -> Vec<u8> {
    (0..n).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect()
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Validation(format!("{what} {v} exceeds u32")))
}

pub fn write_coded<W: Write>(mut out: W, data: &CodedDataset) -> Result<()> {
    out.write_all(RGC_MAGIC)?;
    out.write_all(&to_u32(data.rows, "row count")?.to_le_bytes())?;
    out.write_all(&to_u32(data.width, "width")?.to_le_bytes())?;
    out.write_all(&data.catalog_hash.to_le_bytes())?;
    out.write_all(&to_u32(data.records.len(), "record count")?.to_le_bytes())?;
    for rec in &data.records {
        out.write_all(&to_u32(rec.segment, "segment")?.to_le_bytes())?;
        out.write_all(&pack(rec.first.bits()))?;
        out.write_all(&pack(rec.second.bits()))?;
    }
    out.flush()?;
    Ok(())
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated coded file ({what})")),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(input: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_coded<R: Read>(mut input: R) -> Result<CodedDataset> {
    let mut magic = [0u8; 4];
    read_exact(&mut input, &mut magic, "magic")?;
    if &magic != RGC_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected RGC1")));
    }
    let rows = read_u32(&mut input, "rows")? as usize;
    let width = read_u32(&mut input, "width")? as usize;
    let mut hash = [0u8; 8];
    read_exact(&mut input, &mut hash, "catalog hash")?;
    let catalog_hash = u64::from_le_bytes(hash);
    let n = read_u32(&mut input, "record count")? as usize;

    let cells = rows * width;
    let mut buf = vec![0u8; cells.div_ceil(8)];
    let mut data = CodedDataset::new(rows, width, catalog_hash);
    for _ in 0..n {
        let segment = read_u32(&mut input, "segment")? as usize;
        read_exact(&mut input, &mut buf, "first matrix")?;
        let first = CodedMatrix::from_bits(rows, width, catalog_hash, unpack(&buf, cells))?;
        read_exact(&mut input, &mut buf, "second matrix")?;
        let second = CodedMatrix::from_bits(rows, width, catalog_hash, unpack(&buf, cells))?;
        data.push(segment, first, second)?;
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after last record".into()));
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_bit_exact() {
        let mut data = CodedDataset::new(2, 5, 0x0102030405060708);
        let first = CodedMatrix::from_bits(2, 5, data.catalog_hash, vec![1, 0, 0, 0, 0, 0, 0, 0, 0, 1]).unwrap();
        let second = CodedMatrix::zeros(2, 5, data.catalog_hash);
        data.push(3, first, second).unwrap();
        let mut buf = Vec::new();
        write_coded(&mut buf, &data).unwrap();
        assert_eq!(
            buf,
            [
                b'R', b'G', b'C', b'1', 2, 0, 0, 0, 5, 0, 0, 0, 8, 7, 6, 5, 4, 3, 2, 1, 1, 0, 0, 0,
                3, 0, 0, 0, 0x01, 0x02, 0x00, 0x00,
            ]
        );
        assert_eq!(read_coded(buf.as_slice()).unwrap(), data);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        assert!(matches!(read_coded(&b"RGC2"[..]), Err(Error::Format(_))));
        let mut data = CodedDataset::new(1, 3, 0);
        data.push(0, CodedMatrix::zeros(1, 3, 0), CodedMatrix::zeros(1, 3, 0)).unwrap();
        let mut buf = Vec::new();
        write_coded(&mut buf, &data).unwrap();
        assert!(read_coded(&buf[..buf.len() - 1]).is_err());
        buf.push(0);
        assert!(read_coded(buf.as_slice()).is_err());
    }

    #[test]
    fn mismatched_matrix_rejected() {
        let mut data = CodedDataset::new(2, 4, 0);
        assert!(data.push(0, CodedMatrix::zeros(2, 5, 0), CodedMatrix::zeros(2, 4, 0)).is_err());
        assert!(data.push(0, CodedMatrix::zeros(2, 4, 1), CodedMatrix::zeros(2, 4, 0)).is_err());
    }

    proptest! {
        #[test]
        fn pack_unpack(bits in prop::collection::vec(0u8..2, 0..100)) {
            prop_assert_eq!(unpack(&pack(&bits), bits.len()), bits);
        }
    }
}
