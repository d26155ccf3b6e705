//! OGM1 binary map files.
//!
//! Little-endian layout:
//!
//! ```text
//! magic       4 bytes  "OGM1"
//! version     u16      1
//! resolution  f64
//! origin_x    f64
//! origin_y    f64
//! width       u32
//! height      u32
//! cells       width*height f64, row-major
//! observed    ceil(width*height/8) bytes, row-major, LSB-first
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{GridGeometry, GridMap};

pub const MAP_MAGIC: [u8; 4] = *b"OGM1";
pub const MAP_VERSION: u16 = 1;

const HEADER_LEN: usize = 4 + 2 + 8 * 3 + 4 * 2;

#[derive(Debug, Error)]
pub enum MapIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {0:?}, expected \"OGM1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported map version {0}, expected {MAP_VERSION}")]
    UnsupportedVersion(u16),
    #[error("truncated map file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("invalid map file: {0}")]
    Invalid(String),
}

pub fn write_map<W: Write>(map: &GridMap, mut out: W) -> Result<(), MapIoError> {
    let g = map.geometry();
    let (ox, oy) = g.origin();
    let width = u32::try_from(g.width()).map_err(|_| MapIoError::Invalid("width exceeds u32".into()))?;
    let height = u32::try_from(g.height()).map_err(|_| MapIoError::Invalid("height exceeds u32".into()))?;

    let mut buf = Vec::with_capacity(HEADER_LEN + g.len() * 8 + g.len().div_ceil(8));
    buf.extend_from_slice(&MAP_MAGIC);
    buf.extend_from_slice(&MAP_VERSION.to_le_bytes());
    buf.extend_from_slice(&g.resolution().to_le_bytes());
    buf.extend_from_slice(&ox.to_le_bytes());
    buf.extend_from_slice(&oy.to_le_bytes());
    buf.extend_from_slice(&width.to_le_bytes());
    buf.extend_from_slice(&height.to_le_bytes());
    for v in map.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut bitmap = vec![0u8; g.len().div_ceil(8)];
    for (i, _) in map.observed_flags().iter().enumerate().filter(|(_, &o)| o) {
        bitmap[i / 8] |= 1 << (i % 8);
    }
    buf.extend_from_slice(&bitmap);
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

pub fn read_map<R: Read>(mut input: R) -> Result<GridMap, MapIoError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn save_map(map: &GridMap, path: impl AsRef<Path>) -> Result<(), MapIoError> {
    let file = File::create(path)?;
    write_map(map, BufWriter::new(file))
}

pub fn load_map(path: impl AsRef<Path>) -> Result<GridMap, MapIoError> {
    let file = File::open(path)?;
    read_map(BufReader::new(file))
}

fn decode(bytes: &[u8]) -> Result<GridMap, MapIoError> {
    if bytes.len() < 4 {
        return Err(MapIoError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAP_MAGIC {
        return Err(MapIoError::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(MapIoError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != MAP_VERSION {
        return Err(MapIoError::UnsupportedVersion(version));
    }
    let f64_at = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let resolution = f64_at(6);
    let origin_x = f64_at(14);
    let origin_y = f64_at(22);
    let width = u32_at(30) as usize;
    let height = u32_at(34) as usize;

    let geometry = GridGeometry::new(resolution, origin_x, origin_y, width, height)
        .map_err(|e| MapIoError::Invalid(e.to_string()))?;
    let n = geometry.len();
    let expected = n
        .checked_mul(8)
        .and_then(|v| v.checked_add(HEADER_LEN + n.div_ceil(8)))
        .ok_or_else(|| MapIoError::Invalid("map size overflows".into()))?;
    if bytes.len() < expected {
        return Err(MapIoError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(MapIoError::Invalid(format!(
            "{} trailing bytes after observed bitmap",
            bytes.len() - expected
        )));
    }

    let cells: Vec<f64> = bytes[HEADER_LEN..HEADER_LEN + n * 8]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let bitmap = &bytes[HEADER_LEN + n * 8..];
    let observed: Vec<bool> = (0..n).map(|i| bitmap[i / 8] & (1 << (i % 8)) != 0).collect();

    GridMap::from_parts(geometry, cells, observed).map_err(|e| MapIoError::Invalid(e.to_string()))
}
