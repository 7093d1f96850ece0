use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use super::buffer::ImageBuffer;
use super::ImageError;
use crate::error::{Error, Result};
use crate::fft;
use crate::wavefront::PsfKernel;

/// Modulation against spatial frequency in cycles per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct MtfCurve {
    pub frequency: Vec<f64>,
    pub modulation: Vec<f64>,
}

impl MtfCurve {
    /// Linear interpolation, clamped to the sampled range.
    pub fn at(&self, f: f64) -> f64 {
        let fr = &self.frequency;
        if f <= fr[0] {
            return self.modulation[0];
        }
        let i = fr.partition_point(|&x| x < f);
        if i >= fr.len() {
            return *self.modulation.last().unwrap();
        }
        let t = (f - fr[i - 1]) / (fr[i] - fr[i - 1]);
        self.modulation[i - 1] + t * (self.modulation[i] - self.modulation[i - 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mtf50 {
    pub frequency: f64,
    /// No 0.5 crossing up to Nyquist; `frequency` is then 0.5.
    pub at_nyquist: bool,
}

/// Radially averaged magnitude of the kernel's zero-padded DFT, 1 at DC.
/// Each bin collects the samples whose radius rounds to it and reports
/// their mean radius.
pub fn mtf_from_psf(kernel: &PsfKernel) -> MtfCurve {
    let k = kernel.size;
    let n = (4 * k).next_power_of_two().max(256);
    let mut data = vec![Complex64::default(); n * n];
    for y in 0..k {
        for x in 0..k {
            data[y * n + x].re = kernel.at(y, x);
        }
    }
    fft::fft2(&mut data, n, n, false);
    let dc = data[0].norm();
    let bins = n / 2 + 1;
    let mut sum_m = vec![0.0; bins];
    let mut sum_r = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    let signed = |i: usize| {
        if i <= n / 2 {
            i as f64
        } else {
            i as f64 - n as f64
        }
    };
    for v in 0..n {
        for u in 0..n {
            let r = signed(u).hypot(signed(v));
            let b = r.round() as usize;
            if b < bins {
                sum_m[b] += data[v * n + u].norm() / dc;
                sum_r[b] += r;
                count[b] += 1;
            }
        }
    }
    let frequency = (0..bins)
        .map(|b| sum_r[b] / count[b] as f64 / n as f64)
        .collect();
    let modulation = (0..bins).map(|b| sum_m[b] / count[b] as f64).collect();
    MtfCurve {
        frequency,
        modulation,
    }
}

/// First 0.5 crossing at or below Nyquist, linearly interpolated.
pub fn mtf50(curve: &MtfCurve) -> Mtf50 {
    let (f, m) = (&curve.frequency, &curve.modulation);
    if let Some(&m0) = m.first() {
        if m0 < 0.5 {
            return Mtf50 {
                frequency: f[0],
                at_nyquist: false,
            };
        }
    }
    for i in 0..m.len().saturating_sub(1) {
        if f[i] > 0.5 {
            break;
        }
        if m[i] >= 0.5 && m[i + 1] < 0.5 {
            let t = (m[i] - 0.5) / (m[i] - m[i + 1]);
            let freq = f[i] + t * (f[i + 1] - f[i]);
            if freq <= 0.5 {
                return Mtf50 {
                    frequency: freq,
                    at_nyquist: false,
                };
            }
            break;
        }
    }
    Mtf50 {
        frequency: 0.5,
        at_nyquist: true,
    }
}

/// Pixel rectangle `x..x+width`, `y..y+height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roi {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

/// ESF bins per pixel.
const OVERSAMPLE: usize = 4;

/// Slanted-edge MTF of a near-vertical edge inside `roi`, computed on the
/// channel mean: per-row edge centroids, a straight-line fit, a 4×
/// oversampled edge spread function over perpendicular distance, its
/// Hamming-windowed derivative, and a DFT corrected for the derivative and
/// binning responses.
pub fn slanted_edge_mtf(img: &ImageBuffer, roi: Roi) -> Result<MtfCurve, ImageError> {
    if roi.width < 8
        || roi.height < 8
        || roi.x + roi.width > img.width
        || roi.y + roi.height > img.height
    {
        return Err(ImageError::InvalidConfig(format!(
            "ROI {roi:?} must be at least 8×8 and inside the {}×{} image",
            img.height, img.width
        )));
    }
    let lum = img.luminance();
    let px = |y: usize, x: usize| lum[(roi.y + y) * img.width + roi.x + x];
    let (lo, hi) = (0..roi.height)
        .flat_map(|y| (0..roi.width).map(move |x| (y, x)))
        .map(|(y, x)| px(y, x))
        .fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
    let contrast = hi - lo;
    if !(contrast > 1e-6) {
        return Err(ImageError::NoEdge("ROI is flat".into()));
    }

    let mut rows = Vec::new();
    for y in 0..roi.height {
        let (mut s, mut sx) = (0.0, 0.0);
        for x in 0..roi.width - 1 {
            let d = px(y, x + 1) - px(y, x);
            s += d;
            sx += d * (x as f64 + 0.5);
        }
        if s.abs() > 0.5 * contrast {
            rows.push((y as f64, sx / s));
        }
    }
    if rows.len() < roi.height.div_ceil(2).max(2) {
        return Err(ImageError::NoEdge("too few rows cross an edge".into()));
    }
    let n = rows.len() as f64;
    let (my, mx) = rows
        .iter()
        .fold((0.0, 0.0), |(a, b), &(y, x)| (a + y / n, b + x / n));
    let (syy, syx) = rows.iter().fold((0.0, 0.0), |(a, b), &(y, x)| {
        (a + (y - my) * (y - my), b + (y - my) * (x - mx))
    });
    let slope = syx / syy;
    let cos = 1.0 / (1.0 + slope * slope).sqrt();

    let step = 1.0 / OVERSAMPLE as f64;
    let dist = |y: usize, x: usize| (x as f64 - (mx + slope * (y as f64 - my))) * cos;
    let (dmin, dmax) = (0..roi.height)
        .flat_map(|y| [dist(y, 0), dist(y, roi.width - 1)])
        .fold((f64::MAX, f64::MIN), |(a, b), d| (a.min(d), b.max(d)));
    let first = (dmin / step).floor() as i64;
    let nbins = ((dmax / step).floor() as i64 - first + 1) as usize;
    let mut sum = vec![0.0; nbins];
    let mut count = vec![0usize; nbins];
    for y in 0..roi.height {
        for x in 0..roi.width {
            let b = ((dist(y, x) / step).floor() as i64 - first) as usize;
            sum[b] += px(y, x);
            count[b] += 1;
        }
    }
    let filled: Vec<usize> = (0..nbins).filter(|&i| count[i] > 0).collect();
    let mut esf = vec![0.0; nbins];
    for i in 0..nbins {
        esf[i] = if count[i] > 0 {
            sum[i] / count[i] as f64
        } else {
            let j = filled.partition_point(|&f| f < i);
            match (j.checked_sub(1).map(|k| filled[k]), filled.get(j)) {
                (Some(a), Some(&b)) => {
                    let (va, vb) = (sum[a] / count[a] as f64, sum[b] / count[b] as f64);
                    va + (vb - va) * (i - a) as f64 / (b - a) as f64
                }
                (Some(a), None) => sum[a] / count[a] as f64,
                (None, Some(&b)) => sum[b] / count[b] as f64,
                (None, None) => unreachable!("at least one bin is filled"),
            }
        };
    }

    let mut lsf = vec![0.0; nbins];
    for i in 1..nbins - 1 {
        lsf[i] = 0.5 * (esf[i + 1] - esf[i - 1]);
    }
    let total: f64 = lsf.iter().sum();
    let centre = lsf
        .iter()
        .enumerate()
        .map(|(i, v)| i as f64 * v)
        .sum::<f64>()
        / total;
    let half = centre.max(nbins as f64 - 1.0 - centre).max(1.0);
    for (i, v) in lsf.iter_mut().enumerate() {
        let u = (i as f64 - centre) / half;
        *v *= 0.54 + 0.46 * (std::f64::consts::PI * u).cos();
    }

    let mut data: Vec<Complex64> = lsf.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::fft2(&mut data, 1, nbins, false);
    let dc = data[0].norm();
    let mut frequency = Vec::new();
    let mut modulation = Vec::new();
    for (k, c) in data.iter().enumerate().take(nbins / 2 + 1) {
        let f = k as f64 / (nbins as f64 * step);
        if f > 0.5 + 1e-12 {
            break;
        }
        let sinc = |x: f64| if x == 0.0 { 1.0 } else { x.sin() / x };
        let response =
            sinc(2.0 * std::f64::consts::PI * f * step) * sinc(std::f64::consts::PI * f * step);
        frequency.push(f);
        modulation.push(c.norm() / dc / response);
    }
    Ok(MtfCurve {
        frequency,
        modulation,
    })
}

/// Two columns with a header: `cycles_per_pixel,modulation`.
pub fn write_mtf_csv(path: &Path, curve: &MtfCurve) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(f, "cycles_per_pixel,modulation").map_err(io)?;
    for (fr, m) in curve.frequency.iter().zip(&curve.modulation) {
        writeln!(f, "{fr},{m}").map_err(io)?;
    }
    f.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_mtf_is_flat() {
        let c = mtf_from_psf(&PsfKernel::delta(5));
        assert!(c.modulation.iter().all(|m| (m - 1.0).abs() < 1e-12));
        assert_eq!(c.frequency[0], 0.0);
        assert!(mtf50(&c).at_nyquist);
    }

    #[test]
    fn mtf50_interpolates() {
        let c = MtfCurve {
            frequency: vec![0.0, 0.1, 0.2],
            modulation: vec![1.0, 0.6, 0.4],
        };
        let m = mtf50(&c);
        assert!((m.frequency - 0.15).abs() < 1e-12 && !m.at_nyquist);
    }

    #[test]
    fn flat_roi_has_no_edge() {
        let img = ImageBuffer::constant(20, 20, 1, 0.3);
        let roi = Roi {
            x: 0,
            y: 0,
            width: 20,
            height: 20,
        };
        assert!(matches!(
            slanted_edge_mtf(&img, roi),
            Err(ImageError::NoEdge(_))
        ));
    }
}
