use num_complex::Complex64;
use rayon::prelude::*;

use super::buffer::ImageBuffer;
use super::ImageError;
use crate::error::Result;
use crate::fft;
use crate::registry::Registry;
use crate::wavefront::{PsfGrid, PsfKernel};

/// A 2-D "valid" convolution implementation.
pub trait ConvolutionBackend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Convolves the `in_h × in_w` `input` with the `k × k` `kernel`,
    /// returning the `(in_h − k + 1) × (in_w − k + 1)` samples that need no
    /// data outside `input`.
    fn convolve_valid(
        &self,
        input: &[f64],
        in_h: usize,
        in_w: usize,
        kernel: &[f64],
        k: usize,
    ) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DirectBackend;

impl ConvolutionBackend for DirectBackend {
    fn name(&self) -> &'static str {
        "direct"
    }

    fn convolve_valid(
        &self,
        input: &[f64],
        in_h: usize,
        in_w: usize,
        kernel: &[f64],
        k: usize,
    ) -> Vec<f64> {
        let (oh, ow) = (in_h + 1 - k, in_w + 1 - k);
        let mut out = vec![0.0; oh * ow];
        for ky in 0..k {
            for kx in 0..k {
                // Flipped kernel: output (y, x) takes input (y + k-1-ky, x + k-1-kx).
                let w = kernel[ky * k + kx];
                if w == 0.0 {
                    continue;
                }
                let (dy, dx) = (k - 1 - ky, k - 1 - kx);
                for y in 0..oh {
                    let src = &input[(y + dy) * in_w + dx..(y + dy) * in_w + dx + ow];
                    for (o, s) in out[y * ow..(y + 1) * ow].iter_mut().zip(src) {
                        *o += w * s;
                    }
                }
            }
        }
        out
    }
}

/// Circular convolution by FFT over the input extent; the valid region is
/// free of wrap-around.
#[derive(Debug, Clone, Copy, Default)]
pub struct FftBackend;

/// Smallest 2·3·5-smooth integer ≥ `n`.
fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

impl ConvolutionBackend for FftBackend {
    fn name(&self) -> &'static str {
        "fft"
    }

    fn convolve_valid(
        &self,
        input: &[f64],
        in_h: usize,
        in_w: usize,
        kernel: &[f64],
        k: usize,
    ) -> Vec<f64> {
        let (fh, fw) = (fast_len(in_h), fast_len(in_w));
        let mut a = vec![Complex64::default(); fh * fw];
        for y in 0..in_h {
            for x in 0..in_w {
                a[y * fw + x].re = input[y * in_w + x];
            }
        }
        let mut b = vec![Complex64::default(); fh * fw];
        for y in 0..k {
            for x in 0..k {
                b[y * fw + x].re = kernel[y * k + x];
            }
        }
        fft::fft2(&mut a, fh, fw, false);
        fft::fft2(&mut b, fh, fw, false);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= y;
        }
        fft::fft2(&mut a, fh, fw, true);
        let scale = 1.0 / (fh * fw) as f64;
        let (oh, ow) = (in_h + 1 - k, in_w + 1 - k);
        let mut out = Vec::with_capacity(oh * ow);
        for y in 0..oh {
            for x in 0..ow {
                out.push(a[(y + k - 1) * fw + x + k - 1].re * scale);
            }
        }
        out
    }
}

/// FFT for kernels wider than `threshold`, direct otherwise.
#[derive(Debug, Clone, Copy)]
pub struct AutoBackend {
    pub threshold: usize,
}

impl Default for AutoBackend {
    fn default() -> Self {
        Self { threshold: 7 }
    }
}

impl ConvolutionBackend for AutoBackend {
    fn name(&self) -> &'static str {
        "auto"
    }

    fn convolve_valid(
        &self,
        input: &[f64],
        in_h: usize,
        in_w: usize,
        kernel: &[f64],
        k: usize,
    ) -> Vec<f64> {
        if k > self.threshold {
            FftBackend.convolve_valid(input, in_h, in_w, kernel, k)
        } else {
            DirectBackend.convolve_valid(input, in_h, in_w, kernel, k)
        }
    }
}

pub fn convolution_backends() -> Registry<dyn ConvolutionBackend> {
    let mut r: Registry<dyn ConvolutionBackend> = Registry::new("convolution backend");
    r.register("direct", || Box::new(DirectBackend));
    r.register("fft", || Box::new(FftBackend));
    r.register("auto", || Box::new(AutoBackend::default()));
    r
}

/// Mirror index into `0..n` without repeating the edge sample (`dcba|abcd|dcba`
/// style reflection about the first and last samples), periodic beyond one
/// reflection.
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Start offsets of `parts` integer patches over `len` pixels, with `len`
/// appended.
pub fn patch_bounds(len: usize, parts: usize) -> Vec<usize> {
    (0..=parts).map(|i| i * len / parts).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchConfig {
    /// Width of the linear cross-fade band centred on each seam, pixels.
    pub blend_width: usize,
    /// Multiply by the grid's relative illuminance.
    pub apply_illuminance: bool,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self {
            blend_width: 8,
            apply_illuminance: true,
        }
    }
}

/// Per-pixel `(patch, weight-of-next-patch)` along one axis: pixels inside a
/// seam band blend patch `p` and `p + 1` with `t` rising linearly across the
/// band; elsewhere `t = 0`.
fn axis_blend(bounds: &[usize], band: usize) -> Vec<(usize, f64)> {
    let len = *bounds.last().unwrap();
    let parts = bounds.len() - 1;
    let half = band / 2;
    let mut out = Vec::with_capacity(len);
    let mut p = 0;
    for i in 0..len {
        while p + 1 < parts && i >= bounds[p + 1] {
            p += 1;
        }
        // Band around the seam that ends patch `p`.
        if band > 0 && p + 1 < parts && i + half >= bounds[p + 1] {
            let t = (i as f64 + 0.5 - (bounds[p + 1] - half) as f64) / band as f64;
            out.push((p, t));
        } else if band > 0 && p > 0 && i < bounds[p] + band - half {
            let t = (i as f64 + 0.5 - (bounds[p] - half) as f64) / band as f64;
            out.push((p - 1, t));
        } else {
            out.push((p, 0.0));
        }
    }
    out
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + t * (b - a)
    }
}

/// `Some((row, col, value))` when the kernel has a single non-zero tap.
fn single_tap(kernel: &PsfKernel) -> Option<(usize, usize, f64)> {
    let mut found = None;
    for (i, &v) in kernel.values.iter().enumerate() {
        if v != 0.0 {
            if found.is_some() {
                return None;
            }
            found = Some((i / kernel.size, i % kernel.size, v));
        }
    }
    found
}

/// Convolution of one plane over the output window `y0..y1 × x0..x1`, with
/// reflected borders.
fn convolve_window(
    plane: &[f64],
    h: usize,
    w: usize,
    (y0, y1, x0, x1): (usize, usize, usize, usize),
    kernel: &PsfKernel,
    backend: &dyn ConvolutionBackend,
) -> Vec<f64> {
    let k = kernel.size;
    let r = (k / 2) as isize;
    let (oh, ow) = (y1 - y0, x1 - x0);
    if let Some((ky, kx, v)) = single_tap(kernel) {
        let (dy, dx) = (ky as isize - r, kx as isize - r);
        let mut out = Vec::with_capacity(oh * ow);
        for y in y0..y1 {
            let sy = reflect_index(y as isize - dy, h);
            for x in x0..x1 {
                let sx = reflect_index(x as isize - dx, w);
                let s = plane[sy * w + sx];
                out.push(if v == 1.0 { s } else { v * s });
            }
        }
        return out;
    }
    let (ph, pw) = (oh + k - 1, ow + k - 1);
    let mut padded = Vec::with_capacity(ph * pw);
    for py in 0..ph {
        let sy = reflect_index(y0 as isize + py as isize - r, h);
        for px in 0..pw {
            let sx = reflect_index(x0 as isize + px as isize - r, w);
            padded.push(plane[sy * w + sx]);
        }
    }
    backend.convolve_valid(&padded, ph, pw, &kernel.values, k)
}

/// Spatially varying blur with the default automatic backend.
pub fn convolve_patchwise(
    img: &ImageBuffer,
    grid: &PsfGrid,
    config: &PatchConfig,
) -> Result<ImageBuffer> {
    convolve_patchwise_with(img, grid, config, &AutoBackend::default())
}

/// Convolves each patch of `img` with its grid kernel, cross-fades seams,
/// and scales by the (equally blended) relative illuminance.
///
/// Patch `(r, c)` covers rows `r·H/R .. (r+1)·H/R` (integer division), so
/// any image size works without padding. A single-channel image with a
/// multi-channel grid uses the middle channel.
pub fn convolve_patchwise_with(
    img: &ImageBuffer,
    grid: &PsfGrid,
    config: &PatchConfig,
    backend: &dyn ConvolutionBackend,
) -> Result<ImageBuffer> {
    let (h, w) = (img.height, img.width);
    let (rows, cols) = (grid.rows, grid.cols);
    if rows > h || cols > w {
        return Err(ImageError::DimensionMismatch(format!(
            "{rows}×{cols} patches do not fit a {h}×{w} image"
        ))
        .into());
    }
    let channel_map: Vec<usize> = match (img.channels, grid.channels) {
        (a, b) if a == b => (0..a).collect(),
        (a, 1) => vec![0; a],
        (1, b) => vec![b / 2],
        (a, b) => {
            return Err(ImageError::DimensionMismatch(format!(
                "{a}-channel image with a {b}-channel PSF grid"
            ))
            .into())
        }
    };
    let by = patch_bounds(h, rows);
    let bx = patch_bounds(w, cols);
    let min_patch = by
        .windows(2)
        .chain(bx.windows(2))
        .map(|p| p[1] - p[0])
        .min()
        .unwrap();
    let k = grid.kernels.iter().map(|k| k.size).max().unwrap_or(1);
    if k > min_patch {
        return Err(ImageError::KernelTooLarge {
            kernel: k,
            patch: min_patch,
        }
        .into());
    }
    let band = config.blend_width.min(min_patch);
    let half = band / 2;
    let wy = axis_blend(&by, band);
    let wx = axis_blend(&bx, band);

    // Each patch is evaluated over its own extent grown by the band.
    let window = |r: usize, c: usize| {
        (
            by[r].saturating_sub(half),
            (by[r + 1] + band - half).min(h),
            bx[c].saturating_sub(half),
            (bx[c + 1] + band - half).min(w),
        )
    };
    let tasks: Vec<(usize, usize, usize)> = (0..img.channels)
        .flat_map(|ch| (0..rows).flat_map(move |r| (0..cols).map(move |c| (ch, r, c))))
        .collect();
    let blocks: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(ch, r, c)| {
            let kernel = grid.kernel(r, c, channel_map[ch]);
            convolve_window(img.plane(ch), h, w, window(r, c), kernel, backend)
        })
        .collect();

    let sample = |ch: usize, r: usize, c: usize, y: usize, x: usize| -> f64 {
        let (y0, _, x0, x1) = window(r, c);
        blocks[(ch * rows + r) * cols + c][(y - y0) * (x1 - x0) + (x - x0)]
    };
    let mut out = ImageBuffer::constant(h, w, img.channels, 0.0);
    for ch in 0..img.channels {
        let plane = out.plane_mut(ch);
        for y in 0..h {
            let (pr, ty) = wy[y];
            for x in 0..w {
                let (pc, tx) = wx[x];
                let row_blend = |r: usize| {
                    let a = sample(ch, r, pc, y, x);
                    if tx == 0.0 {
                        a
                    } else {
                        lerp(a, sample(ch, r, pc + 1, y, x), tx)
                    }
                };
                let top = row_blend(pr);
                let mut v = if ty == 0.0 {
                    top
                } else {
                    lerp(top, row_blend(pr + 1), ty)
                };
                if config.apply_illuminance {
                    let il = |r: usize| {
                        lerp(
                            grid.illuminance_at(r, pc),
                            grid.illuminance_at(r, (pc + 1).min(cols - 1)),
                            tx,
                        )
                    };
                    let top = il(pr);
                    let factor = if ty == 0.0 {
                        top
                    } else {
                        lerp(top, il((pr + 1).min(rows - 1)), ty)
                    };
                    v *= factor;
                }
                plane[y * w + x] = v;
            }
        }
    }
    Ok(out)
}
