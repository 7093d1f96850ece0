use super::pupil::ComplexGrid;
use super::PsfError;

/// Normalized, non-negative square blur kernel with odd side length.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfKernel {
    pub size: usize,
    /// Row-major; row index follows image rows.
    pub values: Vec<f64>,
    /// Patch (row, column) this kernel belongs to.
    pub field: (usize, usize),
    pub channel: usize,
    /// Sample pitch in mm; 0 when unknown.
    pub pixel_pitch: f64,
}

impl PsfKernel {
    pub fn from_values(size: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), size * size);
        Self {
            size,
            values,
            field: (0, 0),
            channel: 0,
            pixel_pitch: 0.0,
        }
    }

    pub fn delta(size: usize) -> Self {
        assert!(size % 2 == 1, "kernel size must be odd");
        let mut values = vec![0.0; size * size];
        values[(size / 2) * size + size / 2] = 1.0;
        Self::from_values(size, values)
    }

    /// Sampled isotropic Gaussian, normalized.
    pub fn gaussian(size: usize, sigma: f64) -> Self {
        assert!(size % 2 == 1, "kernel size must be odd");
        let c = (size / 2) as f64;
        let mut values = Vec::with_capacity(size * size);
        for r in 0..size {
            for col in 0..size {
                let (dy, dx) = (r as f64 - c, col as f64 - c);
                values.push((-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp());
            }
        }
        let mut k = Self::from_values(size, values);
        k.normalize();
        k
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Scales to unit sum; returns false when the kernel has no energy.
    pub fn normalize(&mut self) -> bool {
        let s = self.sum();
        if !(s > 0.0 && s.is_finite()) {
            return false;
        }
        self.values.iter_mut().for_each(|v| *v /= s);
        true
    }

    /// Intensity centroid relative to the kernel centre, in samples (x, y).
    pub fn centroid(&self) -> (f64, f64) {
        let c = (self.size / 2) as f64;
        let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
        for r in 0..self.size {
            for col in 0..self.size {
                let v = self.at(r, col);
                sx += v * (col as f64 - c);
                sy += v * (r as f64 - c);
                s += v;
            }
        }
        (sx / s, sy / s)
    }

    /// Second central moment ⟨r²⟩ about the centroid, in samples².
    pub fn second_moment(&self) -> f64 {
        let (cx, cy) = self.centroid();
        let c = (self.size / 2) as f64;
        let mut acc = 0.0;
        let mut s = 0.0;
        for r in 0..self.size {
            for col in 0..self.size {
                let v = self.at(r, col);
                let dx = col as f64 - c - cx;
                let dy = r as f64 - c - cy;
                acc += v * (dx * dx + dy * dy);
                s += v;
            }
        }
        acc / s
    }

    pub fn flip_rows(&self) -> Self {
        let n = self.size;
        let mut out = self.clone();
        for r in 0..n {
            out.values[r * n..(r + 1) * n]
                .copy_from_slice(&self.values[(n - 1 - r) * n..(n - r) * n]);
        }
        out
    }

    pub fn flip_cols(&self) -> Self {
        let n = self.size;
        let mut out = self.clone();
        for r in 0..n {
            out.values[r * n..(r + 1) * n].reverse();
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let n = self.size;
        let mut out = self.clone();
        for r in 0..n {
            for c in 0..n {
                out.values[c * n + r] = self.values[r * n + c];
            }
        }
        out
    }
}

/// `|h|²` cropped to an `out_size` window centred on the intensity centroid
/// (periodic indexing), normalized to unit sum.
pub fn psf_from_asf(h: &ComplexGrid, out_size: usize) -> Result<PsfKernel, PsfError> {
    let m = h.size;
    if out_size.is_multiple_of(2) || out_size >= m {
        return Err(PsfError::InvalidConfig(format!(
            "kernel size {out_size} must be odd and smaller than the field size {m}"
        )));
    }
    let inten = h.intensity();
    let total: f64 = inten.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(PsfError::DegenerateField(
            "amplitude spread function has no energy".into(),
        ));
    }
    // Centroid on the circle so that wrapped energy is handled consistently.
    let centre = |axis: usize| -> usize {
        let (mut cs, mut sn) = (0.0, 0.0);
        for r in 0..m {
            for c in 0..m {
                let k = if axis == 0 { c } else { r };
                let ang = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                let v = inten[r * m + c];
                cs += v * ang.cos();
                sn += v * ang.sin();
            }
        }
        let ang = sn.atan2(cs).rem_euclid(2.0 * std::f64::consts::PI);
        ((ang / (2.0 * std::f64::consts::PI) * m as f64).round() as usize) % m
    };
    let (cx, cy) = (centre(0), centre(1));
    let half = out_size / 2;
    let mut values = Vec::with_capacity(out_size * out_size);
    for r in 0..out_size {
        let rr = (cy + m + r - half) % m;
        for c in 0..out_size {
            let cc = (cx + m + c - half) % m;
            values.push(inten[rr * m + cc]);
        }
    }
    let mut k = PsfKernel::from_values(out_size, values);
    if !k.normalize() {
        return Err(PsfError::DegenerateField(
            "cropped PSF has no energy".into(),
        ));
    }
    Ok(k)
}

/// Overlap weights between fine cells and pixel cells along one axis:
/// for each fine index, the (pixel, fraction) pairs it contributes to.
///
/// The first sample sits at the Nyquist position, which is equally the
/// positive and the negative edge of the periodic field; its energy is
/// split between both so mirrored inputs bin to mirrored kernels.
fn axis_weights(m: usize, step: f64, offset: f64, pitch: f64, k: usize) -> Vec<Vec<(usize, f64)>> {
    let width = step.abs();
    let lo_edge = -(k as f64) / 2.0 * pitch;
    let cell = |u: f64, scale: f64, ws: &mut Vec<(usize, f64)>| {
        let (c0, c1) = (u - width / 2.0, u + width / 2.0);
        let first = ((c0 - lo_edge) / pitch).floor().max(0.0) as usize;
        let last = ((c1 - lo_edge) / pitch).floor();
        if last < 0.0 {
            return;
        }
        let last = (last as usize).min(k.saturating_sub(1));
        for b in first..=last {
            if b >= k {
                break;
            }
            let p0 = lo_edge + b as f64 * pitch;
            let overlap = (c1.min(p0 + pitch) - c0.max(p0)).max(0.0);
            if overlap > 0.0 {
                ws.push((b, scale * overlap / width));
            }
        }
    };
    let mut out = Vec::with_capacity(m);
    for a in 0..m {
        let u = offset + (a as f64 - (m / 2) as f64) * step;
        let mut ws = Vec::new();
        if a == 0 && m.is_multiple_of(2) {
            cell(u, 0.5, &mut ws);
            cell(u + m as f64 * step, 0.5, &mut ws);
        } else {
            cell(u, 1.0, &mut ws);
        }
        out.push(ws);
    }
    out
}

/// Integrates a finely sampled intensity grid (`m × m`, sample spacing
/// `step` mm per axis, index `m/2` located at `offset` mm from the kernel
/// centre) over square pixels of side `pitch`, returning a `k × k`
/// unnormalized kernel.
pub fn bin_to_pixels(
    intensity: &[f64],
    m: usize,
    step: [f64; 2],
    offset: [f64; 2],
    pitch: f64,
    k: usize,
) -> Vec<f64> {
    let wx = axis_weights(m, step[0], offset[0], pitch, k);
    let wy = axis_weights(m, step[1], offset[1], pitch, k);
    let mut rows = vec![0.0; m * k];
    for ay in 0..m {
        if wy[ay].is_empty() {
            continue;
        }
        let src = &intensity[ay * m..(ay + 1) * m];
        let dst = &mut rows[ay * k..(ay + 1) * k];
        for (ax, &v) in src.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for &(b, w) in &wx[ax] {
                dst[b] += v * w;
            }
        }
    }
    let mut out = vec![0.0; k * k];
    for ay in 0..m {
        for &(by, w) in &wy[ay] {
            let src = &rows[ay * k..(ay + 1) * k];
            let dst = &mut out[by * k..(by + 1) * k];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    out
}
