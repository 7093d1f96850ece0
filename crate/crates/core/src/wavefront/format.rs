use std::path::Path;

use image::{ImageBuffer, Rgb};

use super::grid::PsfGrid;
use super::kernel::PsfKernel;
use super::PsfError;
use crate::error::{Error, Result};

pub const PSFG_MAGIC: &[u8; 4] = b"PSFG";
pub const PSFG_VERSION: u16 = 1;

const HEADER_LEN: usize = 4 + 2 + 4 * 4 + 8;

/// Serializes a grid: magic, version, rows, cols, channels, kernel size
/// (u32 each), distance (f64), kernels as f32 in `[row][col][channel][y][x]`
/// order, then the illuminance grid as f32. All little-endian.
pub fn encode_psfg(grid: &PsfGrid) -> Vec<u8> {
    let k = grid.kernel_size;
    let mut out =
        Vec::with_capacity(HEADER_LEN + 4 * (grid.kernels.len() * k * k + grid.illuminance.len()));
    out.extend_from_slice(PSFG_MAGIC);
    out.extend_from_slice(&PSFG_VERSION.to_le_bytes());
    for dim in [grid.rows, grid.cols, grid.channels, k] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out.extend_from_slice(&grid.distance.to_le_bytes());
    for kernel in &grid.kernels {
        for &v in &kernel.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    for &v in &grid.illuminance {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Parses a grid written by [`encode_psfg`]. Kernels are renormalized after
/// the f32 round trip; the pixel pitch is not stored and reads back as 0.
pub fn decode_psfg(bytes: &[u8]) -> Result<PsfGrid, PsfError> {
    let bad = |m: &str| PsfError::Format(m.to_string());
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header"));
    }
    if &bytes[..4] != PSFG_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != PSFG_VERSION {
        return Err(PsfError::Format(format!("unsupported version {version}")));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let (rows, cols, channels, k) = (u32_at(6), u32_at(10), u32_at(14), u32_at(18));
    let distance = f64::from_le_bytes(bytes[22..30].try_into().unwrap());
    if k % 2 == 0 || rows == 0 || cols == 0 || channels == 0 {
        return Err(bad("invalid dimensions"));
    }
    let n_kernels = rows
        .checked_mul(cols)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| bad("dimensions overflow"))?;
    let kernel_floats = n_kernels
        .checked_mul(k * k)
        .ok_or_else(|| bad("dimensions overflow"))?;
    let expected = HEADER_LEN + 4 * (kernel_floats + rows * cols);
    if bytes.len() != expected {
        return Err(PsfError::Format(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let mut floats = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    let mut kernels = Vec::with_capacity(n_kernels);
    for idx in 0..n_kernels {
        let values: Vec<f64> = floats.by_ref().take(k * k).collect();
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(bad("kernel values must be finite and non-negative"));
        }
        let mut kernel = PsfKernel::from_values(k, values);
        if !kernel.normalize() {
            return Err(bad("kernel with zero energy"));
        }
        kernel.field = (idx / channels / cols, (idx / channels) % cols);
        kernel.channel = idx % channels;
        kernels.push(kernel);
    }
    let illuminance: Vec<f64> = floats.collect();
    if illuminance.iter().any(|v| !(*v > 0.0 && *v <= 1.0 + 1e-6)) {
        return Err(bad("illuminance outside (0, 1]"));
    }
    Ok(PsfGrid {
        distance,
        rows,
        cols,
        channels,
        kernel_size: k,
        kernels,
        illuminance: illuminance.into_iter().map(|v| v.min(1.0)).collect(),
    })
}

pub fn write_psfg(path: &Path, grid: &PsfGrid) -> Result<()> {
    std::fs::write(path, encode_psfg(grid)).map_err(|e| Error::io(path, e))
}

pub fn read_psfg(path: &Path) -> Result<PsfGrid> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_psfg(&bytes)?)
}

/// Writes all kernels tiled in patch order, each scaled to its own peak on
/// a log scale spanning four decades. Channels 0..3 map to R, G, B; a
/// single-channel grid is rendered grey.
pub fn render_mosaic_png(path: &Path, grid: &PsfGrid) -> Result<()> {
    let k = grid.kernel_size;
    // One separator pixel between tiles.
    let tile = k + 1;
    let (w, h) = ((grid.cols * tile) as u32, (grid.rows * tile) as u32);
    let mut img = ImageBuffer::<Rgb<u8>, Vec<u8>>::new(w, h);
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            for out_ch in 0..3 {
                let ch = if grid.channels >= 3 { out_ch } else { 0 };
                let kernel = grid.kernel(r, c, ch);
                let peak = kernel.values.iter().cloned().fold(0.0, f64::max);
                for y in 0..k {
                    for x in 0..k {
                        let v = kernel.at(y, x) / peak;
                        let level = (v.max(1e-4).log10() / 4.0 + 1.0).clamp(0.0, 1.0);
                        let px = img.get_pixel_mut((c * tile + x) as u32, (r * tile + y) as u32);
                        px.0[out_ch] = (level * 255.0).round() as u8;
                    }
                }
            }
        }
    }
    img.save(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(other)),
    })
}
