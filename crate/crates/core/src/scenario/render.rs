//! Binary PPM rendering of occupancy maps.
//!
//! Observed cells are gray with value `round(255 * (1 - p))`, so occupied
//! space is dark. Unobserved cells are blue. Image row 0 is the max-y edge.

use std::io::Write;
use std::path::Path;

use crate::grid::{GridMap, LogOdds};

pub const UNOBSERVED_RGB: [u8; 3] = [0, 0, 255];

/// Gray level for an observed cell.
pub fn gray_level(l: LogOdds) -> u8 {
    let p = 1.0 / (1.0 + (-l).exp());
    (255.0 * (1.0 - p)).round() as u8
}

pub fn encode_ppm(map: &GridMap) -> Vec<u8> {
    let (w, h) = (map.width(), map.height());
    let header = format!("P6\n{w} {h}\n255\n");
    let mut out = Vec::with_capacity(header.len() + 3 * w * h);
    out.extend_from_slice(header.as_bytes());
    let values = map.values();
    let observed = map.observed_flags();
    for row in (0..h).rev() {
        for col in 0..w {
            let i = row * w + col;
            if observed[i] {
                let g = gray_level(values[i]);
                out.extend_from_slice(&[g, g, g]);
            } else {
                out.extend_from_slice(&UNOBSERVED_RGB);
            }
        }
    }
    out
}

pub fn write_ppm<W: Write>(map: &GridMap, mut out: W) -> std::io::Result<()> {
    out.write_all(&encode_ppm(map))
}

pub fn render_frame(map: &GridMap, path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, encode_ppm(map))
}
