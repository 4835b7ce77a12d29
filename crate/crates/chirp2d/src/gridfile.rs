//! Lossless binary grid files.
//!
//! Layout: a 16-byte header (`b"CHRP2DGR"`, then `M` and `N` as little-endian
//! u32) followed by `M * N` little-endian f64 values in row-major order.

use crate::signal::SignalGrid;
use std::fmt;

pub const MAGIC: &[u8; 8] = b"CHRP2DGR";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GridFileError {
    BadMagic,
    Truncated { expected: usize, actual: usize },
    /// Header dimensions do not describe a sane grid.
    BadDimensions { rows: u32, cols: u32 },
    /// Payload contains a non-finite value at this element index.
    NonFinite { index: usize },
}

impl fmt::Display for GridFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridFileError::BadMagic => write!(f, "not a grid file (bad magic)"),
            GridFileError::Truncated { expected, actual } => {
                write!(f, "grid file truncated: expected {expected} bytes, got {actual}")
            }
            GridFileError::BadDimensions { rows, cols } => {
                write!(f, "grid file claims unusable dimensions {rows}x{cols}")
            }
            GridFileError::NonFinite { index } => {
                write!(f, "grid file value {index} is not finite")
            }
        }
    }
}

impl std::error::Error for GridFileError {}

pub fn write_grid(grid: &SignalGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * grid.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grid.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.cols() as u32).to_le_bytes());
    for v in grid.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_grid(bytes: &[u8]) -> Result<SignalGrid, GridFileError> {
    if bytes.len() < 16 {
        return Err(if bytes.len() >= 8 && &bytes[..8] == MAGIC {
            GridFileError::Truncated { expected: 16, actual: bytes.len() }
        } else {
            GridFileError::BadMagic
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(GridFileError::BadMagic);
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    const MAX_DIM: u32 = 1 << 20;
    if rows == 0 || cols == 0 || rows > MAX_DIM || cols > MAX_DIM {
        return Err(GridFileError::BadDimensions { rows, cols });
    }
    let count = rows as usize * cols as usize;
    let expected = 16 + 8 * count;
    if bytes.len() != expected {
        return Err(GridFileError::Truncated { expected, actual: bytes.len() });
    }
    let mut data = Vec::with_capacity(count);
    for (i, chunk) in bytes[16..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(GridFileError::NonFinite { index: i });
        }
        data.push(v);
    }
    Ok(SignalGrid::from_data(rows as usize, cols as usize, data)
        .expect("length and finiteness checked"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let grid =
            SignalGrid::from_data(3, 5, (0..15).map(|i| i as f64 * 0.25 - 1.0).collect()).unwrap();
        let bytes = write_grid(&grid);
        assert_eq!(bytes.len(), 16 + 15 * 8);
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(read_grid(&bytes).unwrap(), grid);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(read_grid(b"NOTAGRID"), Err(GridFileError::BadMagic));
        let mut bytes = write_grid(&SignalGrid::zeros(4, 4));
        bytes.truncate(40);
        assert!(matches!(read_grid(&bytes), Err(GridFileError::Truncated { .. })));
        let mut huge = Vec::new();
        huge.extend_from_slice(MAGIC);
        huge.extend_from_slice(&u32::MAX.to_le_bytes());
        huge.extend_from_slice(&1u32.to_le_bytes());
        assert!(matches!(read_grid(&huge), Err(GridFileError::BadDimensions { .. })));
    }
}
